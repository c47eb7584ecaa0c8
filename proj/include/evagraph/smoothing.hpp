#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evagraph/gnn.hpp"
#include "evagraph/graph.hpp"
#include "evagraph/incremental.hpp"
#include "evagraph/rng.hpp"

namespace evagraph {

/// m Bernoulli-perturbed copies of a clean adjacency, stored as flip sets
/// (ascending linear indices) relative to it. Sample i is a pure function of
/// (seed, i).
struct SmoothingCache {
  double p_plus = 0.0;
  double p_minus = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<LinearIndex>> flips;

  std::size_t num_samples() const { return flips.size(); }
  /// Flip set of sample i as a candidate over the clean graph.
  Candidate sample_candidate(std::size_t i) const { return {flips[i]}; }
};

/// Each non-edge switches on with p_plus, each edge switches off with p_minus.
/// Additions are drawn sparsely: count ~ Binomial(#non-edges, p_plus), positions
/// uniform without replacement.
SmoothingCache smoothing_sample(const Graph& g, double p_plus, double p_minus, std::size_t m, std::uint64_t seed);
std::vector<LinearIndex> smoothing_sample_one(const Graph& g, double p_plus, double p_minus, Rng& rng);

/// The cache re-targeted at a perturbed graph: every pair in A0 XOR A1 gets a
/// fresh draw in every sample, using the parameter of its new state; all
/// other entries keep their cached value.
class SmoothingView {
 public:
  const SmoothingCache& cache() const { return *cache_; }
  const std::vector<NodePair>& changed_pairs() const { return changed_; }

  /// Redrawn presence of changed pair k in sample i.
  bool present(std::size_t sample, std::size_t k) const { return present_[sample * changed_.size() + k] != 0; }

  /// Flips that turn cached sample i into this view's sample i.
  std::vector<NodePair> relative_flips(std::size_t sample) const;

  /// Full flip set of sample i relative to the clean graph, ascending.
  std::vector<LinearIndex> flip_set(std::size_t sample) const;

 private:
  friend SmoothingView adaptive_resample(const SmoothingCache&, const Graph&, std::span<const NodePair>, Rng&);
  const SmoothingCache* cache_ = nullptr;
  std::size_t n_ = 0;
  std::vector<NodePair> changed_;
  std::vector<std::uint8_t> clean_state_;  // A0 entry of each changed pair
  std::vector<std::uint8_t> present_;      // m x |changed|
};

/// `changed` lists the distinct pairs of A0 XOR A1 (r < c).
SmoothingView adaptive_resample(const SmoothingCache& cache, const Graph& g0, std::span<const NodePair> changed,
                                Rng& rng);
SmoothingView adaptive_resample(const SmoothingCache& cache, const Graph& g0, const Graph& g1, Rng& rng);

/// Fraction of samples voting for vote_class[i] at nodes[i], evaluated with
/// block-diagonal stacked inference over the sampled graphs.
std::vector<double> smooth_probs(const ModelWeights& w, const Graph& g0, const SmoothingCache& cache,
                                 std::span<const NodeId> nodes, std::span<const std::int64_t> vote_class,
                                 std::size_t max_copies_per_pass = 64);

/// Smooth classifier with one incremental evaluator per cached sample, so a
/// resampled view costs O(m * |changed| * local work).
class SmoothedClassifier {
 public:
  SmoothedClassifier(const ModelWeights& w, const Graph& g0, SmoothingCache cache, std::vector<NodeId> nodes,
                     std::vector<std::int64_t> vote_class);

  const SmoothingCache& cache() const { return cache_; }
  const Graph& clean_graph() const { return g0_; }
  const std::vector<NodeId>& nodes() const { return nodes_; }

  std::vector<double> probabilities() const;
  std::vector<double> probabilities(const SmoothingView& view) const;

 private:
  Graph g0_;
  SmoothingCache cache_;
  std::vector<NodeId> nodes_;
  std::vector<std::int64_t> vote_class_;
  std::vector<IncrementalEvaluator> samples_;
};

}  // namespace evagraph
