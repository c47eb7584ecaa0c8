#include "evagraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace evagraph {

void SbmParams::validate() const {
  if (blocks < 1 || block_size < 1) throw ConfigError("sbm: blocks and block size must be >= 1");
  if (blocks * block_size < 2) throw ConfigError("sbm: need at least two nodes");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    throw ConfigError("sbm: edge probabilities must lie in [0, 1]");
  }
  if (feature_dim < 1) throw ConfigError("sbm: feature dimension must be >= 1");
  if (!(signal >= 0.0) || !(noise >= 0.0)) throw ConfigError("sbm: signal and noise must be >= 0");
  const double total = train_fraction + val_fraction + test_fraction;
  if (train_fraction < 0.0 || val_fraction < 0.0 || test_fraction < 0.0 || total > 1.0 + 1e-12) {
    throw ConfigError("sbm: split fractions must be non-negative and sum to at most 1");
  }
}

SplitMasks exchangeable_split(std::size_t n, double train, double val, double test, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, "split");
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below<std::size_t>(rng, i)]);
  const auto count = [n](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_train = count(train);
  const std::size_t n_val = count(val);
  const std::size_t n_test = count(test);
  SplitMasks m;
  m.train.assign(n, 0);
  m.val.assign(n, 0);
  m.test.assign(n, 0);
  m.unlabeled.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& mask = i < n_train ? m.train : i < n_train + n_val ? m.val : i < n_train + n_val + n_test ? m.test : m.unlabeled;
    mask[perm[i]] = 1;
  }
  return m;
}

Graph make_sbm(const SbmParams& p) {
  p.validate();
  const std::size_t n = p.blocks * p.block_size;
  std::vector<std::int64_t> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<std::int64_t>(v / p.block_size);

  Rng edge_rng = make_rng(p.seed, "synth.edges");
  std::vector<NodePair> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (bernoulli(edge_rng, labels[u] == labels[v] ? p.p_in : p.p_out)) edges.push_back({u, v});
    }
  }

  Rng feat_rng = make_rng(p.seed, "synth.features");
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(p.feature_dim);
  Matrix means(static_cast<Eigen::Index>(p.blocks), d);
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    for (Eigen::Index j = 0; j < d; ++j) means(c, j) = static_cast<float>(p.signal * normal(feat_rng));
  }
  auto features = std::make_shared<Matrix>(static_cast<Eigen::Index>(n), d);
  for (std::size_t v = 0; v < n; ++v) {
    for (Eigen::Index j = 0; j < d; ++j) {
      (*features)(static_cast<Eigen::Index>(v), j) =
          means(labels[v], j) + static_cast<float>(p.noise * normal(feat_rng));
    }
  }
  auto masks = exchangeable_split(n, p.train_fraction, p.val_fraction, p.test_fraction, p.seed);
  return Graph::from_edges(n, edges, std::move(features), std::move(labels), std::move(masks));
}

}  // namespace evagraph
