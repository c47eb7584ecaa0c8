#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evagraph/graph.hpp"
#include "evagraph/rng.hpp"

namespace evagraph {

enum class MutationKind { uniform, targeted, adaptive };

std::string to_string(MutationKind k);
MutationKind parse_mutation_kind(const std::string& s);

struct GAConfig {
  std::size_t population = 1024;
  std::size_t steps = 500;
  double mutation_rate = 0.01;
  std::size_t tournament_size = 2;
  std::size_t crossover_joints = 30;
  MutationKind mutation = MutationKind::adaptive;
  std::optional<std::size_t> elite_count;  // default population / 16
  std::size_t t_warm = 0;
  std::uint64_t seed = 0;
  /// Stop early once best-so-far fitness exceeds this value.
  std::optional<double> stop_above;
  std::size_t projection_attempts = 16;
  /// Threads used to evaluate candidates; results do not depend on it.
  std::size_t workers = 1;

  std::size_t elites() const;
  void validate() const;
};

struct Population {
  std::vector<Candidate> candidates;
  std::vector<double> fitness;
  std::size_t generation = 0;
  Candidate best;
  double best_fitness = -std::numeric_limits<double>::infinity();
};

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  /// Local-constraint excess summed over the children before projection.
  std::uint64_t violations = 0;
};

/// What the search optimizes. `evaluate` receives the generation number and
/// the population slot of the first candidate so it can derive per-candidate
/// random substreams. `misclassified` feeds adaptive mutation; may be empty.
struct SearchProblem {
  std::function<std::vector<double>(std::span<const Candidate>, std::size_t generation, std::size_t first_slot)>
      evaluate;
  std::function<std::vector<NodeId>(const Candidate&)> misclassified;
};

/// Pair with one endpoint drawn from `restricted` and the other from V minus it.
LinearIndex targeted_gene(std::span<const NodeId> restricted, std::size_t n, Rng& rng);

/// Every gene from targeted_gene over v_att; fitness left empty.
Population init_population(const Graph& g, const AttackScope& scope, const GAConfig& cfg, Rng& rng);

/// n_tour uniform draws with replacement; the fittest wins, ties to the lowest index.
std::size_t tournament_select(std::span<const double> fitness, std::size_t n_tour, Rng& rng);

/// Child gene t comes from s1 when an even number of joints lie strictly before t.
Candidate crossover(const Candidate& s1, const Candidate& s2, std::span<const std::size_t> joints);

/// min(k, length) distinct joint positions in [0, length), ascending.
std::vector<std::size_t> draw_joints(std::size_t length, std::size_t k, Rng& rng);

Candidate mutate(const Candidate& cand, MutationKind kind, std::size_t n, std::span<const NodeId> v_att,
                 std::span<const NodeId> misclassified, double p, Rng& rng);

using FrequencyScores = std::unordered_map<LinearIndex, double>;

/// Fraction of candidates in `pool` containing each gene.
FrequencyScores frequency_scores(std::span<const Candidate> pool);

/// Local-constraint excess of base XOR cand, computed from degree deltas only.
std::uint64_t candidate_violations(const Graph& base, const Candidate& cand, double e_loc);

/// Greedy feasibility projection under the local budget in scope.e_loc.
/// Output always has zero local violations and the input length.
Candidate local_project(const Candidate& cand, const Graph& base, const AttackScope& scope,
                        const FrequencyScores& scores, Rng& rng, bool warmup, std::size_t attempts = 16);

/// One generation: elitism, tournament + crossover + mutation, optional
/// projection, evaluation of the children.
Population step(const Population& pop, const Graph& base, const AttackScope& scope, const GAConfig& cfg,
                const SearchProblem& problem, Rng& rng, GenerationRecord* record = nullptr);

/// Evaluates a fresh population and fills best-so-far.
void evaluate_initial(Population& pop, const SearchProblem& problem);

struct SearchResult {
  Population final_population;
  Candidate best;
  double best_fitness = 0.0;
  std::vector<GenerationRecord> telemetry;
};

/// init + cfg.steps generations (or until stop_above is exceeded).
SearchResult run_search(const Graph& base, const AttackScope& scope, const GAConfig& cfg,
                        const SearchProblem& problem);

}  // namespace evagraph
