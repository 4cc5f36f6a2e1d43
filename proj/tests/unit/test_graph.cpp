#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hybrec/errors.hpp"
#include "hybrec/graph.hpp"
#include "test_support.hpp"

using namespace hybrec;
using hybrec::testing::dense_normalized_adjacency;
using hybrec::testing::EdgeList;
using hybrec::testing::max_abs;
using hybrec::testing::naive_matmul;
using hybrec::testing::random_edges;
using hybrec::testing::random_matrix;

namespace {

std::vector<Interaction> pairs(std::initializer_list<std::pair<int, int>> ps) {
  std::vector<Interaction> out;
  for (auto [u, i] : ps) out.push_back({u, i, 1.0, 0});
  return out;
}

Matrix relu_oracle(Matrix m) {
  for (double& v : m.values()) v = std::max(v, 0.0);
  return m;
}

// a - b - c with a, c users and b the single item. Node ids: a=0, c=1, b=2.
InteractionGraph path3() {
  const EdgeList e{{0, 0}, {1, 0}};
  return graph_from_dense(2, 1, e);
}

}  // namespace

TEST(BuildGraph, DeduplicatesEdges) {
  const auto built = build_graph(pairs({{0, 0}, {0, 0}}));
  EXPECT_EQ(built.graph.num_edges(), 1u);
  EXPECT_EQ(built.graph.degree(built.graph.user_node(0)), 1u);
  EXPECT_EQ(built.graph.degree(built.graph.item_node(0)), 1u);
}

TEST(BuildGraph, DegreesCountedPerNode) {
  const auto built = build_graph(pairs({{0, 0}, {0, 1}, {1, 1}}));
  const auto& g = built.graph;
  EXPECT_EQ(g.degree(g.user_node(0)), 2u);
  EXPECT_EQ(g.degree(g.user_node(1)), 1u);
  EXPECT_EQ(g.degree(g.item_node(0)), 1u);
  EXPECT_EQ(g.degree(g.item_node(1)), 2u);
}

TEST(BuildGraph, EmptyInputIsError) {
  EXPECT_THROW(build_graph(std::vector<Interaction>{}), EmptyGraphError);
}

TEST(BuildGraph, NegativeIdRejected) {
  EXPECT_THROW(build_graph(pairs({{-1, 0}})), InvalidArgument);
}

TEST(BuildGraph, ExternalIdsMapInAscendingOrder) {
  const auto built = build_graph(pairs({{70, 9}, {30, 5}, {30, 9}}));
  EXPECT_EQ(built.ids.user(30), 0u);
  EXPECT_EQ(built.ids.user(70), 1u);
  EXPECT_EQ(built.ids.external_item(1), 9);
  EXPECT_TRUE(built.graph.has_edge(built.graph.user_node(1), built.graph.item_node(1)));
  EXPECT_FALSE(built.graph.has_edge(built.graph.user_node(1), built.graph.item_node(0)));
}

TEST(BuildGraph, SharedIdMapKeepsHeldOutNodes) {
  const auto all = pairs({{0, 0}, {1, 1}, {2, 2}});
  const IdMap ids = IdMap::from_interactions(all);
  const auto built = build_graph(pairs({{0, 0}}), ids);
  EXPECT_EQ(built.graph.num_users(), 3u);
  EXPECT_EQ(built.graph.num_items(), 3u);
  EXPECT_EQ(built.graph.degree(built.graph.user_node(2)), 0u);
}

TEST(BuildGraph, AdjacencySymmetricAndBipartite) {
  Rng rng(17);
  const auto e = random_edges(9, 7, 0.3, rng);
  const auto g = graph_from_dense(9, 7, e);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const auto nb = g.neighbors(v);
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    for (NodeId u : nb) {
      EXPECT_NE(g.is_user(u), g.is_user(v));
      EXPECT_TRUE(g.has_edge(u, v));
    }
  }
}

TEST(NormConstant, SqrtOfDegreeProduct) {
  EXPECT_DOUBLE_EQ(norm_constant(path3(), 0, 2), std::sqrt(1.0 * 2.0));

  // user 0 with 4 items, item 0 with 9 users
  EdgeList e;
  for (std::uint32_t i = 0; i < 4; ++i) e.emplace_back(0, i);
  for (std::uint32_t u = 1; u < 9; ++u) e.emplace_back(u, 0);
  const auto g = graph_from_dense(9, 4, e);
  EXPECT_DOUBLE_EQ(norm_constant(g, g.user_node(0), g.item_node(0)), 6.0);

  // 2x2 complete bipartite graph: every degree is 2
  const auto k22 = graph_from_dense(2, 2, EdgeList{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  EXPECT_DOUBLE_EQ(norm_constant(k22, 0, k22.item_node(1)), 2.0);

  const auto single = graph_from_dense(1, 1, EdgeList{{0, 0}});
  EXPECT_DOUBLE_EQ(norm_constant(single, 0, 1), 1.0);
}

TEST(NormConstant, NonEdgeRejected) {
  const auto g = graph_from_dense(2, 2, EdgeList{{0, 0}});
  EXPECT_THROW(norm_constant(g, 0, g.item_node(1)), InvalidArgument);
}

TEST(Propagate, SingleEdgeUnitWeight) {
  const auto g = graph_from_dense(1, 1, EdgeList{{0, 0}});
  const NodeEmbeddings h0{0, Matrix::from_rows({{1.0}, {1.0}})};
  const auto h1 = propagate(g, h0, Matrix::from_rows({{1.0}}), Activation::relu);
  EXPECT_EQ(h1.layer, 1u);
  EXPECT_EQ(h1.vectors(0, 0), 1.0);
  EXPECT_EQ(h1.vectors(1, 0), 1.0);
}

TEST(Propagate, IsolatedNodeIsZero) {
  const auto g = graph_from_dense(2, 1, EdgeList{{0, 0}});
  const NodeEmbeddings h0{0, Matrix::from_rows({{1.0, 2.0}, {5.0, -3.0}, {0.5, 0.5}})};
  const auto h1 = propagate(g, h0, Matrix::identity(2), Activation::identity);
  EXPECT_EQ(h1.vectors(1, 0), 0.0);
  EXPECT_EQ(h1.vectors(1, 1), 0.0);
}

TEST(Propagate, ThreeNodePath) {
  const NodeEmbeddings h0{0, Matrix::from_rows({{1.0}, {3.0}, {2.0}})};
  const auto h1 = propagate(path3(), h0, Matrix::from_rows({{1.0}}), Activation::identity);
  EXPECT_NEAR(h1.vectors(0, 0), 1.41421356, 1e-8);  // a
  EXPECT_NEAR(h1.vectors(2, 0), 2.82842712, 1e-8);  // b
  EXPECT_NEAR(h1.vectors(1, 0), 1.41421356, 1e-8);  // c
}

TEST(Propagate, ShapeMismatchRejected) {
  const NodeEmbeddings h0{0, Matrix(3, 2)};
  EXPECT_THROW(propagate(path3(), h0, Matrix(3, 3), Activation::relu), InvalidArgument);
  const NodeEmbeddings wrong_rows{0, Matrix(4, 1)};
  EXPECT_THROW(propagate(path3(), wrong_rows, Matrix(1, 1), Activation::relu), InvalidArgument);
}

TEST(Propagate, MatchesDenseOracleOnRandomGraphs) {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t users = 1 + rng.below(25), items = 1 + rng.below(25);
    const auto e = random_edges(users, items, rng.uniform(0.05, 0.5), rng);
    const auto g = graph_from_dense(users, items, e);
    const Matrix a = dense_normalized_adjacency(users, items, e);
    const Matrix h = random_matrix(users + items, 3, rng);
    const Matrix w = random_matrix(3, 4, rng);
    const auto out = propagate(g, {0, h}, w, Activation::relu);
    EXPECT_LT(max_abs(out.vectors, relu_oracle(naive_matmul(naive_matmul(a, h), w))), 1e-10);
  }
}

TEST(Encode, SingleLayerIsOnePropagate) {
  Rng rng(4);
  const auto g = graph_from_dense(4, 3, random_edges(4, 3, 0.5, rng));
  const Matrix h = random_matrix(7, 2, rng);
  const std::vector<Matrix> w{random_matrix(2, 2, rng)};
  EXPECT_EQ(encode(g, {0, h}, w).vectors, propagate(g, {0, h}, w[0], Activation::identity).vectors);
}

TEST(Encode, TwoLayersOnPathMatchDenseOracle) {
  const EdgeList e{{0, 0}, {1, 0}};
  const Matrix a = dense_normalized_adjacency(2, 1, e);
  const Matrix h0 = Matrix::from_rows({{1.0, -1.0}, {3.0, 0.5}, {2.0, 2.0}});
  const std::vector<Matrix> w{Matrix::from_rows({{1.0, -2.0}, {0.5, 1.0}}), Matrix::from_rows({{0.3, 1.0}, {-1.0, 2.0}})};
  const Matrix h1 = relu_oracle(naive_matmul(naive_matmul(a, h0), w[0]));
  const Matrix h2 = naive_matmul(naive_matmul(a, h1), w[1]);
  const auto out = encode(path3(), {0, h0}, w);
  EXPECT_EQ(out.layer, 2u);
  EXPECT_LT(max_abs(out.vectors, h2), 1e-12);
}

TEST(Encode, ZeroInputStaysZero) {
  Rng rng(8);
  const auto g = graph_from_dense(5, 5, random_edges(5, 5, 0.4, rng));
  for (std::size_t layers = 1; layers <= 3; ++layers) {
    std::vector<Matrix> w;
    for (std::size_t l = 0; l < layers; ++l) w.push_back(random_matrix(3, 3, rng));
    const auto out = encode(g, {0, Matrix(10, 3)}, w);
    for (double v : out.vectors.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Encode, PermutationEquivariant) {
  Rng rng(31);
  const std::size_t users = 6, items = 5;
  const auto e = random_edges(users, items, 0.35, rng);
  const Matrix h0 = random_matrix(users + items, 3, rng);
  const std::vector<Matrix> w{random_matrix(3, 3, rng), random_matrix(3, 3, rng)};

  std::vector<std::uint32_t> pu(users), pi(items);
  std::iota(pu.begin(), pu.end(), 0u);
  std::iota(pi.begin(), pi.end(), 0u);
  rng.shuffle(std::span(pu));
  rng.shuffle(std::span(pi));
  EdgeList pe;
  for (auto [u, i] : e) pe.emplace_back(pu[u], pi[i]);
  Matrix ph0(users + items, 3);
  const auto node_perm = [&](std::size_t v) { return v < users ? pu[v] : users + pi[v - users]; };
  for (std::size_t v = 0; v < users + items; ++v)
    std::copy(h0.row(v).begin(), h0.row(v).end(), ph0.row(node_perm(v)).begin());

  const auto out = encode(graph_from_dense(users, items, e), {0, h0}, w);
  const auto pout = encode(graph_from_dense(users, items, pe), {0, ph0}, w);
  for (std::size_t v = 0; v < users + items; ++v)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.vectors(v, c), pout.vectors(node_perm(v), c), 1e-12);
}

TEST(Encode, InputEdgeOrderIrrelevant) {
  Rng rng(12);
  auto e = random_edges(6, 6, 0.4, rng);
  const Matrix h0 = random_matrix(12, 2, rng);
  const std::vector<Matrix> w{random_matrix(2, 2, rng), random_matrix(2, 2, rng)};
  const auto out = encode(graph_from_dense(6, 6, e), {0, h0}, w);
  std::reverse(e.begin(), e.end());
  e.insert(e.end(), e.begin(), e.begin() + 3);  // duplicates too
  EXPECT_EQ(encode(graph_from_dense(6, 6, e), {0, h0}, w).vectors, out.vectors);
}

TEST(EncodeNodes, BitwiseEqualToFullEncode) {
  Rng rng(77);
  const auto g = graph_from_dense(20, 15, random_edges(20, 15, 0.1, rng));
  const Matrix h0 = random_matrix(35, 4, rng);
  const std::vector<Matrix> w{random_matrix(4, 4, rng), random_matrix(4, 4, rng), random_matrix(4, 4, rng)};
  const auto full = encode(g, {0, h0}, w);
  const std::vector<NodeId> targets{34, 0, 7, 7, 21};
  const Matrix sub = encode_nodes(g, h0, w, targets);
  ASSERT_EQ(sub.rows(), targets.size());
  for (std::size_t r = 0; r < targets.size(); ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(sub(r, c), full.vectors(targets[r], c));
}
