#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "hybrec/linalg.hpp"

namespace hybrec {

using NodeId = std::uint32_t;

// One observed user-item interaction with external ids.
struct Interaction {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double weight = 1.0;
  std::int64_t timestamp = 0;
};

// External id -> dense internal id, separately for users and items.
// Dense ids follow ascending external id order.
class IdMap {
 public:
  IdMap() = default;
  static IdMap from_interactions(std::span<const Interaction> interactions);

  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }

  bool has_user(std::int64_t external) const { return user_index_.contains(external); }
  bool has_item(std::int64_t external) const { return item_index_.contains(external); }
  std::uint32_t user(std::int64_t external) const;
  std::uint32_t item(std::int64_t external) const;
  std::int64_t external_user(std::uint32_t dense) const { return users_.at(dense); }
  std::int64_t external_item(std::uint32_t dense) const { return items_.at(dense); }

 private:
  std::vector<std::int64_t> users_;
  std::vector<std::int64_t> items_;
  std::unordered_map<std::int64_t, std::uint32_t> user_index_;
  std::unordered_map<std::int64_t, std::uint32_t> item_index_;
};

// Bipartite user-item graph in CSR form. Node ids: users are [0, num_users),
// item j is num_users + j. Adjacency is symmetric and deduplicated; each row
// is sorted ascending.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  InteractionGraph(std::size_t num_users, std::size_t num_items, std::vector<std::size_t> offsets,
                   std::vector<NodeId> adjacency);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_nodes() const { return num_users_ + num_items_; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }

  NodeId user_node(std::uint32_t user) const { return user; }
  NodeId item_node(std::uint32_t item) const { return static_cast<NodeId>(num_users_ + item); }
  bool is_user(NodeId v) const { return v < num_users_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId v, NodeId u) const;

  // 1/sqrt(deg v * deg u) for each adjacency entry, aligned with neighbors(v).
  std::span<const double> inv_norms(NodeId v) const {
    return {inv_norm_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> adjacency() const { return neighbors_; }

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> neighbors_;
  std::vector<double> inv_norm_;
};

struct BuiltGraph {
  InteractionGraph graph;
  IdMap ids;
};

// Deduplicates interactions into a bipartite graph. Ids come from `ids` when
// given (so held-out users/items keep a node), otherwise from the input.
// Throws EmptyGraphError on empty input, InvalidArgument on negative ids or
// ids missing from `ids`.
BuiltGraph build_graph(std::span<const Interaction> interactions);
BuiltGraph build_graph(std::span<const Interaction> interactions, const IdMap& ids);

// Same as build_graph but with dense ids already assigned.
InteractionGraph graph_from_dense(std::size_t num_users, std::size_t num_items,
                                  std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);

// c_vu = sqrt(deg v * deg u). Throws InvalidArgument when (v, u) is not an edge.
double norm_constant(const InteractionGraph& graph, NodeId v, NodeId u);

enum class Activation { identity, relu };

struct NodeEmbeddings {
  std::size_t layer = 0;
  Matrix vectors;  // num_nodes x d
};

// out[v] = sum_{u in N(v)} h[u] / c_vu, summed in adjacency order. No self
// term: isolated nodes aggregate to zero.
Matrix aggregate(const InteractionGraph& graph, const Matrix& h);
void aggregate_row(const InteractionGraph& graph, const Matrix& h, NodeId v, std::span<double> out);

// One layer: activation(aggregate(h_prev) * w).
NodeEmbeddings propagate(const InteractionGraph& graph, const NodeEmbeddings& h_prev, const Matrix& w,
                         Activation activation);

// Stacked propagate for every weight; ReLU on hidden layers, identity on the last.
NodeEmbeddings encode(const InteractionGraph& graph, const NodeEmbeddings& h0, std::span<const Matrix> weights);

// Final-layer embeddings for `targets` only, computed over their receptive
// field. Row i of the result corresponds to targets[i] and is bitwise equal
// to the matching row of encode().
Matrix encode_nodes(const InteractionGraph& graph, const Matrix& h0, std::span<const Matrix> weights,
                    std::span<const NodeId> targets);

}  // namespace hybrec
