#pragma once

#include <cstdint>

#include "evagraph/graph.hpp"
#include "evagraph/rng.hpp"

namespace evagraph {

/// Stochastic block model with one class per block and Gaussian
/// class-conditional features: x = mu[y] + noise * N(0, I), mu[c] ~ signal * N(0, I).
struct SbmParams {
  std::size_t blocks = 4;
  std::size_t block_size = 50;
  double p_in = 0.15;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double signal = 1.0;
  double noise = 1.0;
  double train_fraction = 0.1;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

Graph make_sbm(const SbmParams& params);

/// Exchangeable split: a uniform permutation cut into train/val/test by the
/// given fractions, the rest unlabeled.
SplitMasks exchangeable_split(std::size_t n, double train, double val, double test, std::uint64_t seed);

}  // namespace evagraph
