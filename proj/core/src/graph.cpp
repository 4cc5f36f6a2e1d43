#include "hybrec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hybrec/errors.hpp"

namespace hybrec {

namespace {

// out = in * w, accumulating over k in ascending order.
void row_times(std::span<const double> in, const Matrix& w, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < in.size(); ++k) {
    const double s = in[k];
    const auto wrow = w.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += s * wrow[j];
  }
}

void apply(Activation activation, std::span<double> values) {
  if (activation == Activation::relu) {
    for (double& v : values) v = v > 0.0 ? v : 0.0;
  }
}

void transform_row(const InteractionGraph& graph, const Matrix& h, const Matrix& w, Activation activation,
                   NodeId v, std::vector<double>& scratch, std::span<double> out) {
  scratch.assign(h.cols(), 0.0);
  aggregate_row(graph, h, v, scratch);
  row_times(scratch, w, out);
  apply(activation, out);
}

}  // namespace

IdMap IdMap::from_interactions(std::span<const Interaction> interactions) {
  IdMap map;
  for (const auto& x : interactions) {
    if (x.user < 0 || x.item < 0) throw InvalidArgument("IdMap: ids must be non-negative");
    map.users_.push_back(x.user);
    map.items_.push_back(x.item);
  }
  for (auto* v : {&map.users_, &map.items_}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  for (std::uint32_t i = 0; i < map.users_.size(); ++i) map.user_index_.emplace(map.users_[i], i);
  for (std::uint32_t i = 0; i < map.items_.size(); ++i) map.item_index_.emplace(map.items_[i], i);
  return map;
}

std::uint32_t IdMap::user(std::int64_t external) const {
  auto it = user_index_.find(external);
  if (it == user_index_.end()) throw InvalidArgument("IdMap: unknown user " + std::to_string(external));
  return it->second;
}

std::uint32_t IdMap::item(std::int64_t external) const {
  auto it = item_index_.find(external);
  if (it == item_index_.end()) throw InvalidArgument("IdMap: unknown item " + std::to_string(external));
  return it->second;
}

InteractionGraph::InteractionGraph(std::size_t num_users, std::size_t num_items, std::vector<std::size_t> offsets,
                                   std::vector<NodeId> adjacency)
    : num_users_(num_users), num_items_(num_items), offsets_(std::move(offsets)), neighbors_(std::move(adjacency)) {
  if (offsets_.size() != num_nodes() + 1 || offsets_.back() != neighbors_.size()) {
    throw InvalidArgument("InteractionGraph: offsets do not match node count");
  }
  inv_norm_.resize(neighbors_.size());
  for (NodeId v = 0; v < num_nodes(); ++v) {
    const auto nb = neighbors(v);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] >= num_nodes() || is_user(v) == is_user(nb[k])) {
        throw InvalidArgument("InteractionGraph: edge is not user-item");
      }
      inv_norm_[offsets_[v] + k] =
          1.0 / std::sqrt(static_cast<double>(degree(v)) * static_cast<double>(degree(nb[k])));
    }
  }
}

bool InteractionGraph::has_edge(NodeId v, NodeId u) const {
  if (v >= num_nodes() || u >= num_nodes()) return false;
  const auto nb = neighbors(v);
  return std::binary_search(nb.begin(), nb.end(), u);
}

InteractionGraph graph_from_dense(std::size_t num_users, std::size_t num_items,
                                  std::span<const std::pair<std::uint32_t, std::uint32_t>> edges) {
  if (edges.empty()) throw EmptyGraphError("build_graph: no interactions");
  const std::size_t n = num_users + num_items;
  std::vector<std::vector<NodeId>> rows(n);
  for (const auto& [u, i] : edges) {
    if (u >= num_users || i >= num_items) throw InvalidArgument("build_graph: dense id out of range");
    const auto item_node = static_cast<NodeId>(num_users + i);
    rows[u].push_back(item_node);
    rows[item_node].push_back(u);
  }
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<NodeId> neighbors;
  for (std::size_t v = 0; v < n; ++v) {
    auto& r = rows[v];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    neighbors.insert(neighbors.end(), r.begin(), r.end());
    offsets[v + 1] = neighbors.size();
  }
  return InteractionGraph(num_users, num_items, std::move(offsets), std::move(neighbors));
}

BuiltGraph build_graph(std::span<const Interaction> interactions) {
  if (interactions.empty()) throw EmptyGraphError("build_graph: no interactions");
  return build_graph(interactions, IdMap::from_interactions(interactions));
}

BuiltGraph build_graph(std::span<const Interaction> interactions, const IdMap& ids) {
  if (interactions.empty()) throw EmptyGraphError("build_graph: no interactions");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(interactions.size());
  for (const auto& x : interactions) {
    if (x.user < 0 || x.item < 0) throw InvalidArgument("build_graph: ids must be non-negative");
    edges.emplace_back(ids.user(x.user), ids.item(x.item));
  }
  return {graph_from_dense(ids.num_users(), ids.num_items(), edges), ids};
}

double norm_constant(const InteractionGraph& graph, NodeId v, NodeId u) {
  if (!graph.has_edge(v, u)) {
    throw InvalidArgument("norm_constant: (" + std::to_string(v) + ", " + std::to_string(u) + ") is not an edge");
  }
  return std::sqrt(static_cast<double>(graph.degree(v)) * static_cast<double>(graph.degree(u)));
}

void aggregate_row(const InteractionGraph& graph, const Matrix& h, NodeId v, std::span<double> out) {
  const auto nb = graph.neighbors(v);
  const auto w = graph.inv_norms(v);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < nb.size(); ++k) {
    const auto src = h.row(nb[k]);
    const double c = w[k];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * src[j];
  }
}

Matrix aggregate(const InteractionGraph& graph, const Matrix& h) {
  if (h.rows() != graph.num_nodes()) throw InvalidArgument("aggregate: row count must equal node count");
  Matrix out(h.rows(), h.cols());
  for (NodeId v = 0; v < graph.num_nodes(); ++v) aggregate_row(graph, h, v, out.row(v));
  return out;
}

NodeEmbeddings propagate(const InteractionGraph& graph, const NodeEmbeddings& h_prev, const Matrix& w,
                         Activation activation) {
  const Matrix& h = h_prev.vectors;
  if (h.rows() != graph.num_nodes()) throw InvalidArgument("propagate: row count must equal node count");
  if (h.cols() != w.rows()) throw InvalidArgument("propagate: weight rows must equal embedding width");
  NodeEmbeddings out{h_prev.layer + 1, Matrix(h.rows(), w.cols())};
  std::vector<double> scratch;
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    transform_row(graph, h, w, activation, v, scratch, out.vectors.row(v));
  }
  return out;
}

NodeEmbeddings encode(const InteractionGraph& graph, const NodeEmbeddings& h0, std::span<const Matrix> weights) {
  if (weights.empty()) throw InvalidArgument("encode: need at least one layer");
  NodeEmbeddings h = h0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const bool last = l + 1 == weights.size();
    h = propagate(graph, h, weights[l], last ? Activation::identity : Activation::relu);
  }
  return h;
}

Matrix encode_nodes(const InteractionGraph& graph, const Matrix& h0, std::span<const Matrix> weights,
                    std::span<const NodeId> targets) {
  if (weights.empty()) throw InvalidArgument("encode_nodes: need at least one layer");
  if (h0.rows() != graph.num_nodes()) throw InvalidArgument("encode_nodes: row count must equal node count");
  const std::size_t layers = weights.size();

  // needed[l]: nodes whose layer-l embedding is required, for l = 1..L.
  std::vector<std::vector<NodeId>> needed(layers + 1);
  needed[layers].assign(targets.begin(), targets.end());
  for (std::size_t l = layers; l > 1; --l) {
    auto& below = needed[l - 1];
    for (NodeId v : needed[l]) {
      const auto nb = graph.neighbors(v);
      below.insert(below.end(), nb.begin(), nb.end());
    }
    std::sort(below.begin(), below.end());
    below.erase(std::unique(below.begin(), below.end()), below.end());
  }

  // Sparse layer storage: rows only for needed nodes, indexed through a
  // scatter table into a full-height matrix of the previous layer.
  Matrix prev_full = h0;
  std::vector<double> scratch;
  for (std::size_t l = 1; l <= layers; ++l) {
    const Matrix& w = weights[l - 1];
    if (prev_full.cols() != w.rows()) throw InvalidArgument("encode_nodes: weight shape mismatch");
    const Activation act = l == layers ? Activation::identity : Activation::relu;
    if (l == layers) {
      Matrix out(targets.size(), w.cols());
      for (std::size_t i = 0; i < targets.size(); ++i) {
        transform_row(graph, prev_full, w, act, targets[i], scratch, out.row(i));
      }
      return out;
    }
    Matrix next(graph.num_nodes(), w.cols());
    for (NodeId v : needed[l]) transform_row(graph, prev_full, w, act, v, scratch, next.row(v));
    prev_full = std::move(next);
  }
  return {};
}

}  // namespace hybrec
