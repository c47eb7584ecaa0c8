#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "evagraph/gnn.hpp"
#include "evagraph/graph.hpp"
#include "evagraph/rng.hpp"
#include "evagraph/synth.hpp"

namespace testing {

using namespace evagraph;

inline SplitMasks all_test(std::size_t n) {
  SplitMasks m;
  m.train.assign(n, 0);
  m.val.assign(n, 0);
  m.test.assign(n, 1);
  m.unlabeled.assign(n, 0);
  return m;
}

inline std::shared_ptr<Matrix> random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  auto x = std::make_shared<Matrix>(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x->size(); ++i) x->data()[i] = normal(rng);
  return x;
}

/// Erdos-Renyi graph with Gaussian features and uniform labels; every node in the test split.
inline Graph random_graph(std::size_t n, double p, std::size_t d, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(p);
  std::vector<NodePair> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (edge(rng)) edges.push_back({u, v});
    }
  }
  std::vector<std::int64_t> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<std::int64_t>(v % classes);
  return Graph::from_edges(n, edges, random_features(n, d, seed + 1), labels, all_test(n));
}

inline ModelWeights random_weights(ModelKind kind, std::size_t d, std::size_t classes, std::uint64_t seed,
                                   int hidden = 8) {
  Rng rng(seed);
  auto w = init_weights(kind, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(classes), rng, hidden);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  for (Eigen::Index i = 0; i < w.b0.size(); ++i) w.b0(i) = normal(rng);
  for (Eigen::Index i = 0; i < w.b1.size(); ++i) w.b1(i) = normal(rng);
  return w;
}

using Dense = Eigen::MatrixXd;

/// Dense adjacency of g.
inline Dense dense_adjacency(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Dense a = Dense::Zero(n, n);
  for (const auto& e : g.edge_list()) {
    a(e.r, e.c) = 1.0;
    a(e.c, e.r) = 1.0;
  }
  return a;
}

/// D^-1/2 (A + I) D^-1/2 computed densely.
inline Dense dense_normalized(const Dense& a) {
  const Dense ai = a + Dense::Identity(a.rows(), a.cols());
  const Eigen::VectorXd dinv = ai.rowwise().sum().array().rsqrt();
  return dinv.asDiagonal() * ai * dinv.asDiagonal();
}

/// Dense double-precision forward pass, independent of the sparse engine.
inline Dense dense_forward(const ModelWeights& w, const Dense& a, const Matrix& x) {
  const Dense xd = x.cast<double>();
  const Dense w0 = w.W0.cast<double>();
  const Dense w1 = w.W1.cast<double>();
  const Eigen::RowVectorXd b0 = w.b0.cast<double>();
  const Eigen::RowVectorXd b1 = w.b1.cast<double>();
  Dense h;
  if (w.kind == ModelKind::gcn) {
    const Dense an = dense_normalized(a);
    h = an * xd * w0;
    h.rowwise() += b0;
    h = h.cwiseMax(0.0);
    Dense out = an * h * w1;
    out.rowwise() += b1;
    return out;
  }
  h = xd * w0;
  h.rowwise() += b0;
  h = h.cwiseMax(0.0);
  Dense out = h * w1;
  out.rowwise() += b1;
  return out;
}

/// Toy SBM with a trained GCN, small enough for fast attack tests.
struct Toy {
  Graph g;
  ModelWeights w;
};

inline SbmParams toy_params(std::uint64_t seed, std::size_t block_size = 40) {
  SbmParams p;
  p.blocks = 3;
  p.block_size = block_size;
  p.p_in = 4.0 / static_cast<double>(block_size);
  p.p_out = 0.6 / static_cast<double>(block_size);
  p.feature_dim = 8;
  p.signal = 0.6;
  p.noise = 1.0;
  p.train_fraction = 0.2;
  p.val_fraction = 0.2;
  p.test_fraction = 0.3;
  p.seed = seed;
  return p;
}

inline Toy make_toy(std::uint64_t seed, std::size_t block_size = 40) {
  Toy t;
  t.g = make_sbm(toy_params(seed, block_size));
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.hidden = 16;
  t.w = train(t.g, cfg);
  return t;
}

}  // namespace testing
