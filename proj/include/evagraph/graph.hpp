#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "evagraph/common.hpp"

namespace evagraph {

/// Unordered node pair stored with r < c.
struct NodePair {
  NodeId r = 0;
  NodeId c = 0;
  friend bool operator==(const NodePair&, const NodePair&) = default;
  friend auto operator<=>(const NodePair&, const NodePair&) = default;
};

/// Number of unordered pairs of an n-node graph, n(n-1)/2.
constexpr LinearIndex pair_count(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

/// Row-major linear index of (r, c), r < c, in the strict upper triangle.
LinearIndex pi_index(NodeId r, NodeId c, std::uint64_t n);

/// Inverse of pi_index. Evaluates the closed form and guards the floor against
/// floating-point rounding at row boundaries.
NodePair pi_inverse(LinearIndex l, std::uint64_t n);

/// The bare closed-form inverse, no rounding guard. Exposed for oracle tests.
NodePair pi_inverse_closed_form(LinearIndex l, std::uint64_t n);

enum class Split : std::uint8_t { train = 0, val = 1, test = 2, unlabeled = 3 };

struct SplitMasks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;
  std::vector<std::uint8_t> unlabeled;

  const std::vector<std::uint8_t>& get(Split s) const;
};

/// Undirected, unweighted graph in CSR form (each edge stored in both rows,
/// rows sorted, no self-loops). Immutable after construction; the feature
/// matrix is shared between graphs derived from one another.
class Graph {
 public:
  Graph() = default;

  /// Builds CSR from an edge list. Self-loops are dropped, duplicates and
  /// reversed duplicates collapse.
  static Graph from_edges(std::size_t n, std::span<const NodePair> edges,
                          std::shared_ptr<const Matrix> features, std::vector<std::int64_t> labels,
                          SplitMasks masks);

  /// Wraps an existing CSR after validating every invariant.
  static Graph from_csr(std::vector<std::uint32_t> row_offsets, std::vector<std::uint32_t> col_indices,
                        std::shared_ptr<const Matrix> features, std::vector<std::int64_t> labels,
                        SplitMasks masks);

  std::size_t num_nodes() const { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
  std::size_t num_edges() const { return col_indices_.size() / 2; }
  std::size_t num_features() const { return features_ ? static_cast<std::size_t>(features_->cols()) : 0; }
  std::size_t num_classes() const { return num_classes_; }

  std::uint32_t degree(NodeId v) const { return row_offsets_[v + 1] - row_offsets_[v]; }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {col_indices_.data() + row_offsets_[v], degree(v)};
  }
  bool has_edge(NodeId u, NodeId v) const;

  const std::vector<std::uint32_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::uint32_t>& col_indices() const { return col_indices_; }
  const Matrix& features() const { return *features_; }
  const std::shared_ptr<const Matrix>& shared_features() const { return features_; }
  const std::vector<std::int64_t>& labels() const { return labels_; }
  const SplitMasks& masks() const { return masks_; }

  /// Ascending node ids whose mask entry is set.
  std::vector<NodeId> nodes_in(Split s) const;

  /// Undirected edges (r < c) in row-major order.
  std::vector<NodePair> edge_list() const;

  /// Same nodes/features/labels/masks, new adjacency.
  Graph with_adjacency(std::vector<std::uint32_t> row_offsets, std::vector<std::uint32_t> col_indices) const;

  /// Throws Error naming the first violated invariant.
  void validate() const;

 private:
  std::vector<std::uint32_t> row_offsets_;
  std::vector<std::uint32_t> col_indices_;
  std::shared_ptr<const Matrix> features_;
  std::vector<std::int64_t> labels_;
  SplitMasks masks_;
  std::size_t num_classes_ = 0;
};

/// Subgraph induced by `nodes` (ascending), relabeled 0..k-1 in that order.
Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Fixed-length list of linear pair indices; duplicates allowed.
struct Candidate {
  std::vector<LinearIndex> genes;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Distinct genes of a candidate, ascending. Duplicates collapse to one flip.
std::vector<LinearIndex> distinct_genes(const Candidate& cand);

/// Decoded distinct flips of a candidate, validated against n.
std::vector<NodePair> decode_flips(const Candidate& cand, std::size_t n);

/// A XOR P, where P holds each distinct pair once.
Graph apply_perturbation(const Graph& g, const Candidate& cand);
Graph apply_flips(const Graph& g, std::span<const NodePair> distinct_flips);

/// Pairs whose adjacency differs between g0 and g1, ascending.
std::vector<NodePair> symmetric_difference(const Graph& g0, const Graph& g1);

struct LocalViolations {
  std::uint64_t total = 0;
  std::vector<std::uint32_t> per_node;
};

/// floor(e_loc * deg0(v)).
std::uint32_t local_allowance(std::uint32_t deg0, double e_loc);

LocalViolations count_local_violations(const Graph& g0, const Graph& g1, double e_loc);

/// Undirected edges with at least one endpoint in v_att, each counted once.
std::uint64_t incident_edge_count(const Graph& g, std::span<const NodeId> v_att);

/// Nodes under attack plus the budget they induce.
struct AttackScope {
  std::vector<NodeId> v_att;  // ascending, distinct
  double epsilon = 0.0;
  std::optional<double> e_loc;
  std::uint64_t delta = 0;

  /// delta = floor(epsilon * |E[v_att : V]|).
  static AttackScope make(const Graph& g, std::vector<NodeId> v_att, double epsilon,
                          std::optional<double> e_loc = std::nullopt);
  /// Explicit budget, used by targeted attacks.
  static AttackScope with_budget(const Graph& g, std::vector<NodeId> v_att, std::uint64_t delta,
                                 std::optional<double> e_loc = std::nullopt);
};

std::uint64_t budget_for(double epsilon, std::uint64_t incident_edges);

}  // namespace evagraph
