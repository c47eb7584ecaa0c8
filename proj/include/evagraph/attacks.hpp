#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evagraph/ga.hpp"
#include "evagraph/gnn.hpp"
#include "evagraph/graph.hpp"
#include "evagraph/objectives.hpp"

namespace evagraph {

struct Flip {
  NodeId r = 0;
  NodeId c = 0;
  bool add = true;
};

struct ChunkReport {
  std::vector<NodeId> nodes;
  std::uint64_t delta = 0;
  std::size_t steps = 0;
  double best_fitness = 0.0;
  std::size_t flips = 0;
  std::vector<GenerationRecord> telemetry;
};

struct AttackResult {
  std::string mode;
  FitnessKind objective = FitnessKind::accuracy;
  std::uint64_t seed = 0;
  std::uint64_t delta = 0;
  Candidate best;
  std::vector<Flip> flips;
  double best_fitness = 0.0;
  std::map<std::string, double> clean_metrics;
  std::map<std::string, double> attacked_metrics;
  std::vector<GenerationRecord> telemetry;
  std::vector<ChunkReport> chunks;
  std::size_t evaluations = 0;
  double wall_seconds = 0.0;
  /// Targeted mode: smallest successful budget, empty when NA.
  std::optional<std::uint64_t> minimal_budget;
  std::optional<NodeId> target;
  std::vector<std::string> warnings;

  double clean_metric() const;
  double attacked_metric() const;
};

/// Name of the headline metric reported for an objective.
std::string primary_metric(FitnessKind kind);

/// Flips tagged add/remove against the clean graph, ascending.
std::vector<Flip> tag_flips(const Graph& g, std::span<const NodePair> distinct_flips);

/// GA fitness for `spec` over scope.v_att, evaluated incrementally against g.
/// Evaluation counts accumulate into *evaluations when given.
SearchProblem make_problem(const ModelWeights& w, const Graph& g, const AttackScope& scope, const FitnessSpec& spec,
                           std::uint64_t seed, std::size_t workers = 1, std::size_t* evaluations = nullptr);

/// Metrics of the model on g XOR flips, recomputed from scratch.
std::map<std::string, double> evaluate_metrics(const ModelWeights& w, const Graph& g0,
                                               std::span<const NodePair> flips, const AttackScope& scope,
                                               const FitnessSpec& spec, std::uint64_t seed);

AttackResult attack_global(const Graph& g, const ModelWeights& w, const AttackScope& scope, const FitnessSpec& spec,
                           const GAConfig& ga);

/// Requires scope.e_loc; the result has no local violations.
AttackResult attack_local(const Graph& g, const ModelWeights& w, const AttackScope& scope, const FitnessSpec& spec,
                          const GAConfig& ga);

enum class TargetedSearch { evolutionary, random };

/// Budgets 1..max_budget against a single node with the tanh-margin fitness
/// until its prediction flips. The random variant spends the same number of
/// evaluations per budget on random targeted candidates.
AttackResult attack_targeted(const Graph& g, const ModelWeights& w, NodeId node, std::uint64_t max_budget,
                             const GAConfig& ga, TargetedSearch search = TargetedSearch::evolutionary);

struct DnCPlan {
  std::size_t k_dc = 1;
  std::vector<std::vector<NodeId>> chunks;
  std::vector<std::uint64_t> budgets;
};

/// Random balanced partition of v_att. Edges between two chunks count half
/// toward each, so the chunk budgets never sum above scope.delta.
DnCPlan plan_dnc(const Graph& g, const AttackScope& scope, std::size_t k_dc, std::uint64_t seed);

/// Sequential chunk attacks. The total evaluation count matches a single-shot
/// run with the same GAConfig; generations are split across chunks.
AttackResult attack_dnc(const Graph& g, const ModelWeights& w, const AttackScope& scope, const DnCPlan& plan,
                        const FitnessSpec& spec, const GAConfig& ga);

/// Best of `trials` targeted random candidates (projected when e_loc is set).
AttackResult attack_random_baseline(const Graph& g, const ModelWeights& w, const AttackScope& scope,
                                    const FitnessSpec& spec, std::size_t trials, std::uint64_t seed);

AttackResult attack_certificate(const Graph& g, const ModelWeights& w, const AttackScope& scope,
                                const SmoothingParams& params, const GAConfig& ga);

/// objective must be conformal_coverage or conformal_set_size.
AttackResult attack_conformal(const Graph& g, const ModelWeights& w, const AttackScope& scope, double alpha,
                              FitnessKind objective, const GAConfig& ga);

}  // namespace evagraph
