#pragma once

#include <memory>
#include <span>
#include <vector>

#include "evagraph/gnn.hpp"
#include "evagraph/graph.hpp"

namespace evagraph {

/// Re-evaluates model logits on a fixed node set after a handful of edge
/// flips without a full forward pass.
///
/// A flip (u, v) changes the normalized row of u, v and of their neighbors
/// (through deg(u), deg(v)); the hidden layer therefore changes only on that
/// set, and the output only on it plus one more hop. Everything else is read
/// from the clean pass computed at construction.
class IncrementalEvaluator {
 public:
  IncrementalEvaluator(const ModelWeights& w, Graph base, std::span<const NodeId> requested);

  /// Shares the feature transform X * W0 with other evaluators of the same model.
  IncrementalEvaluator(const ModelWeights& w, Graph base, std::span<const NodeId> requested,
                       std::shared_ptr<const Matrix> feature_transform);

  const Graph& base() const { return base_; }
  const std::vector<NodeId>& requested() const { return requested_; }

  /// Rows aligned with requested().
  const Matrix& clean_logits() const { return clean_; }

  /// Logits of requested() on base XOR flips. `distinct_flips` must not repeat a pair.
  Matrix logits(std::span<const NodePair> distinct_flips) const;
  Matrix logits(const Candidate& cand) const;

  /// Writes into `out` (resized to match clean_logits()).
  void logits_into(std::span<const NodePair> distinct_flips, Matrix& out) const;

  static std::shared_ptr<const Matrix> feature_transform(const ModelWeights& w, const Graph& g);

 private:
  ModelWeights w_;
  Graph base_;
  std::vector<NodeId> requested_;
  std::vector<std::int32_t> requested_pos_;
  std::shared_ptr<const Matrix> z_;
  std::vector<float> dinv_;
  Matrix g_;  // relu(A Z + b0) W1 for every node
  Matrix clean_;
};

}  // namespace evagraph
