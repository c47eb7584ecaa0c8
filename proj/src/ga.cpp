#include "evagraph/ga.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace evagraph {

std::string to_string(MutationKind k) {
  switch (k) {
    case MutationKind::uniform: return "uniform";
    case MutationKind::targeted: return "targeted";
    case MutationKind::adaptive: return "adaptive";
  }
  return "adaptive";
}

MutationKind parse_mutation_kind(const std::string& s) {
  if (s == "uniform" || s == "um") return MutationKind::uniform;
  if (s == "targeted" || s == "tm") return MutationKind::targeted;
  if (s == "adaptive" || s == "atm") return MutationKind::adaptive;
  throw ConfigError("unknown mutation kind '" + s + "'");
}

std::size_t GAConfig::elites() const { return elite_count.value_or(population / 16); }

void GAConfig::validate() const {
  if (population < 2) throw ConfigError("GA: population must be >= 2");
  if (elites() >= population) throw ConfigError("GA: elite count must be below the population size");
  if (crossover_joints < 1) throw ConfigError("GA: crossover joints must be >= 1");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("GA: mutation rate must lie in [0, 1]");
  if (tournament_size < 1) throw ConfigError("GA: tournament size must be >= 1");
}

LinearIndex targeted_gene(std::span<const NodeId> restricted, std::size_t n, Rng& rng) {
  if (n < 2) throw ConfigError("cannot form node pairs in a graph with fewer than two nodes");
  const NodeId u = restricted[uniform_below<std::size_t>(rng, restricted.size())];
  auto v = static_cast<NodeId>(uniform_below<std::size_t>(rng, n - 1));
  if (v >= u) ++v;
  return u < v ? pi_index(u, v, n) : pi_index(v, u, n);
}

Population init_population(const Graph& g, const AttackScope& scope, const GAConfig& cfg, Rng& rng) {
  const std::size_t n = g.num_nodes();
  if (n < 2) throw ConfigError("cannot form node pairs in a graph with fewer than two nodes");
  if (scope.v_att.empty()) throw ConfigError("attack scope: v_att is empty");
  Population pop;
  pop.candidates.resize(cfg.population);
  for (auto& cand : pop.candidates) {
    cand.genes.resize(scope.delta);
    for (auto& gene : cand.genes) gene = targeted_gene(scope.v_att, n, rng);
  }
  return pop;
}

std::size_t tournament_select(std::span<const double> fitness, std::size_t n_tour, Rng& rng) {
  if (fitness.empty()) throw ConfigError("tournament over an empty population");
  std::size_t best = uniform_below<std::size_t>(rng, fitness.size());
  for (std::size_t k = 1; k < n_tour; ++k) {
    const std::size_t idx = uniform_below<std::size_t>(rng, fitness.size());
    if (fitness[idx] > fitness[best] || (fitness[idx] == fitness[best] && idx < best)) best = idx;
  }
  return best;
}

Candidate crossover(const Candidate& s1, const Candidate& s2, std::span<const std::size_t> joints) {
  if (s1.genes.size() != s2.genes.size()) throw DimensionError("crossover: parents differ in length");
  Candidate child;
  child.genes.resize(s1.genes.size());
  std::size_t j = 0;
  for (std::size_t t = 0; t < child.genes.size(); ++t) {
    while (j < joints.size() && joints[j] < t) ++j;
    child.genes[t] = (j % 2 == 0) ? s1.genes[t] : s2.genes[t];
  }
  return child;
}

std::vector<std::size_t> draw_joints(std::size_t length, std::size_t k, Rng& rng) {
  k = std::min(k, length);
  std::vector<std::size_t> pos(length);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_below<std::size_t>(rng, length - i);
    std::swap(pos[i], pos[j]);
  }
  pos.resize(k);
  std::sort(pos.begin(), pos.end());
  return pos;
}

Candidate mutate(const Candidate& cand, MutationKind kind, std::size_t n, std::span<const NodeId> v_att,
                 std::span<const NodeId> misclassified, double p, Rng& rng) {
  Candidate out = cand;
  if (p <= 0.0 || out.genes.empty()) return out;
  std::vector<NodeId> eligible;
  std::span<const NodeId> restricted = v_att;
  if (kind == MutationKind::adaptive && !misclassified.empty()) {
    std::vector<NodeId> sorted_mis(misclassified.begin(), misclassified.end());
    std::sort(sorted_mis.begin(), sorted_mis.end());
    std::set_difference(v_att.begin(), v_att.end(), sorted_mis.begin(), sorted_mis.end(),
                        std::back_inserter(eligible));
    // Every node already flipped: fall back to targeted mutation.
    if (!eligible.empty()) restricted = eligible;
  }
  const LinearIndex total = pair_count(n);
  for (auto& gene : out.genes) {
    if (!bernoulli(rng, p)) continue;
    gene = kind == MutationKind::uniform ? uniform_below<LinearIndex>(rng, total) : targeted_gene(restricted, n, rng);
  }
  return out;
}

FrequencyScores frequency_scores(std::span<const Candidate> pool) {
  FrequencyScores scores;
  if (pool.empty()) return scores;
  for (const auto& cand : pool) {
    for (auto gene : distinct_genes(cand)) scores[gene] += 1.0;
  }
  const auto size = static_cast<double>(pool.size());
  for (auto& [gene, s] : scores) s /= size;
  return scores;
}

namespace {

// Degree bookkeeping for a growing set of kept flips over a fixed base graph.
class DegreeLedger {
 public:
  DegreeLedger(const Graph& base, double e_loc) : base_(base), e_loc_(e_loc) {}

  bool is_edge(const NodePair& p) const { return base_.has_edge(p.r, p.c); }

  std::int64_t delta(NodeId v) const {
    auto it = delta_.find(v);
    return it == delta_.end() ? 0 : it->second;
  }
  std::int64_t allowance(NodeId v) const { return local_allowance(base_.degree(v), e_loc_); }
  std::int64_t excess(NodeId v) const { return std::max<std::int64_t>(0, delta(v) - allowance(v)); }

  bool fits(const NodePair& p) const {
    if (is_edge(p)) return true;
    return delta(p.r) + 1 <= allowance(p.r) && delta(p.c) + 1 <= allowance(p.c);
  }
  void apply(const NodePair& p, int sign) {
    const int d = is_edge(p) ? -sign : sign;
    delta_[p.r] += d;
    delta_[p.c] += d;
  }
  const std::unordered_map<NodeId, std::int64_t>& deltas() const { return delta_; }

 private:
  const Graph& base_;
  double e_loc_;
  std::unordered_map<NodeId, std::int64_t> delta_;
};

}  // namespace

std::uint64_t candidate_violations(const Graph& base, const Candidate& cand, double e_loc) {
  DegreeLedger ledger(base, e_loc);
  for (auto gene : distinct_genes(cand)) ledger.apply(pi_inverse(gene, base.num_nodes()), +1);
  std::uint64_t total = 0;
  for (const auto& [v, d] : ledger.deltas()) total += static_cast<std::uint64_t>(ledger.excess(v));
  return total;
}

Candidate local_project(const Candidate& cand, const Graph& base, const AttackScope& scope,
                        const FrequencyScores& scores, Rng& rng, bool warmup, std::size_t attempts) {
  if (!scope.e_loc) throw ConfigError("local projection requires e_loc");
  const std::size_t n = base.num_nodes();
  const std::size_t len = cand.genes.size();
  Candidate out = cand;
  if (len == 0) return out;

  DegreeLedger ledger(base, *scope.e_loc);
  std::unordered_set<LinearIndex> kept;
  std::vector<std::uint8_t> slot_kept(len, 0);

  if (!warmup) {
    std::vector<double> s(len);
    std::uniform_real_distribution<double> jitter(0.0, 0.05);
    for (std::size_t t = 0; t < len; ++t) {
      auto it = scores.find(cand.genes[t]);
      s[t] = (it == scores.end() ? 0.0 : it->second) + jitter(rng);
    }
    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&s](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    for (std::size_t t : order) {
      const LinearIndex gene = cand.genes[t];
      if (kept.count(gene)) {
        slot_kept[t] = 1;
        continue;
      }
      const auto pair = pi_inverse(gene, n);
      if (ledger.fits(pair)) {
        ledger.apply(pair, +1);
        kept.insert(gene);
        slot_kept[t] = 1;
      }
    }
  } else {
    // Random projection: drop violating additions with probability proportional
    // to the excess at their endpoints until nothing is violated.
    for (std::size_t t = 0; t < len; ++t) {
      if (kept.insert(cand.genes[t]).second) ledger.apply(pi_inverse(cand.genes[t], n), +1);
      slot_kept[t] = 1;
    }
    while (true) {
      std::vector<LinearIndex> genes;
      std::vector<double> weights;
      for (auto gene : kept) {
        const auto p = pi_inverse(gene, n);
        if (ledger.is_edge(p)) continue;
        const double w = static_cast<double>(ledger.excess(p.r) + ledger.excess(p.c));
        if (w > 0.0) {
          genes.push_back(gene);
          weights.push_back(w);
        }
      }
      if (genes.empty()) break;
      // Hash-set iteration order is not portable; sort for a stable draw.
      std::vector<std::size_t> idx(genes.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::sort(idx.begin(), idx.end(), [&genes](std::size_t a, std::size_t b) { return genes[a] < genes[b]; });
      std::vector<double> w_sorted(genes.size());
      for (std::size_t i = 0; i < idx.size(); ++i) w_sorted[i] = weights[idx[i]];
      std::discrete_distribution<std::size_t> pick(w_sorted.begin(), w_sorted.end());
      const LinearIndex drop = genes[idx[pick(rng)]];
      kept.erase(drop);
      ledger.apply(pi_inverse(drop, n), -1);
      for (std::size_t t = 0; t < len; ++t) {
        if (cand.genes[t] == drop) slot_kept[t] = 0;
      }
    }
  }

  // Refill dropped slots with feasible targeted draws.
  std::vector<LinearIndex> kept_list;
  for (std::size_t t = 0; t < len; ++t) {
    if (slot_kept[t]) kept_list.push_back(cand.genes[t]);
  }
  for (std::size_t t = 0; t < len; ++t) {
    if (slot_kept[t]) continue;
    bool filled = false;
    for (std::size_t a = 0; a < attempts && !filled; ++a) {
      const LinearIndex gene = targeted_gene(scope.v_att, n, rng);
      if (kept.count(gene)) continue;
      const auto pair = pi_inverse(gene, n);
      if (!ledger.fits(pair)) continue;
      ledger.apply(pair, +1);
      kept.insert(gene);
      kept_list.push_back(gene);
      out.genes[t] = gene;
      filled = true;
    }
    if (filled) continue;
    if (!kept_list.empty()) {
      out.genes[t] = kept_list[uniform_below<std::size_t>(rng, kept_list.size())];
      continue;
    }
    // Nothing kept yet: removing an existing edge never violates the local budget.
    std::vector<NodePair> removable;
    for (NodeId u : scope.v_att) {
      for (NodeId v : base.neighbors(u)) removable.push_back(u < v ? NodePair{u, v} : NodePair{v, u});
    }
    if (removable.empty()) removable = base.edge_list();
    if (removable.empty()) throw ConfigError("local projection: no feasible flip exists in an edgeless graph");
    const auto pair = removable[uniform_below<std::size_t>(rng, removable.size())];
    const LinearIndex gene = pi_index(pair.r, pair.c, n);
    ledger.apply(pair, +1);
    kept.insert(gene);
    kept_list.push_back(gene);
    out.genes[t] = gene;
  }
  return out;
}

void evaluate_initial(Population& pop, const SearchProblem& problem) {
  pop.fitness = problem.evaluate(pop.candidates, pop.generation, 0);
  if (pop.fitness.size() != pop.candidates.size()) throw DimensionError("evaluate returned the wrong count");
  for (std::size_t i = 0; i < pop.fitness.size(); ++i) {
    if (pop.fitness[i] > pop.best_fitness) {
      pop.best_fitness = pop.fitness[i];
      pop.best = pop.candidates[i];
    }
  }
}

Population step(const Population& pop, const Graph& base, const AttackScope& scope, const GAConfig& cfg,
                const SearchProblem& problem, Rng& rng, GenerationRecord* record) {
  const std::size_t size = pop.candidates.size();
  const std::size_t elites = std::min(cfg.elites(), size);
  const std::size_t n = base.num_nodes();

  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&pop](std::size_t a, std::size_t b) { return pop.fitness[a] > pop.fitness[b]; });

  Population next;
  next.generation = pop.generation + 1;
  next.best = pop.best;
  next.best_fitness = pop.best_fitness;
  next.candidates.reserve(size);
  next.fitness.reserve(size);
  for (std::size_t i = 0; i < elites; ++i) {
    next.candidates.push_back(pop.candidates[order[i]]);
    next.fitness.push_back(pop.fitness[order[i]]);
  }

  std::vector<NodeId> misclassified;
  if (cfg.mutation == MutationKind::adaptive && problem.misclassified) misclassified = problem.misclassified(pop.best);

  const std::size_t children = size - elites;
  std::vector<std::pair<std::size_t, std::size_t>> parents(children);
  for (auto& pr : parents) {
    pr.first = tournament_select(pop.fitness, cfg.tournament_size, rng);
    pr.second = tournament_select(pop.fitness, cfg.tournament_size, rng);
  }

  FrequencyScores scores;
  if (scope.e_loc) {
    std::vector<Candidate> pool;
    pool.reserve(children * 2);
    for (const auto& [a, b] : parents) {
      pool.push_back(pop.candidates[a]);
      pool.push_back(pop.candidates[b]);
    }
    scores = frequency_scores(pool);
  }

  std::uint64_t violations = 0;
  std::vector<Candidate> fresh;
  fresh.reserve(children);
  for (const auto& [a, b] : parents) {
    const auto& s1 = pop.candidates[a];
    const auto joints = draw_joints(s1.genes.size(), cfg.crossover_joints, rng);
    Candidate child = crossover(s1, pop.candidates[b], joints);
    child = mutate(child, cfg.mutation, n, scope.v_att, misclassified, cfg.mutation_rate, rng);
    if (scope.e_loc) {
      violations += candidate_violations(base, child, *scope.e_loc);
      child = local_project(child, base, scope, scores, rng, pop.generation < cfg.t_warm, cfg.projection_attempts);
    }
    fresh.push_back(std::move(child));
  }

  const auto fit = problem.evaluate(fresh, next.generation, elites);
  if (fit.size() != fresh.size()) throw DimensionError("evaluate returned the wrong count");
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    if (fit[i] > next.best_fitness) {
      next.best_fitness = fit[i];
      next.best = fresh[i];
    }
    next.candidates.push_back(std::move(fresh[i]));
    next.fitness.push_back(fit[i]);
  }

  if (record) {
    record->generation = next.generation;
    record->best_fitness = next.best_fitness;
    record->mean_fitness = std::accumulate(next.fitness.begin(), next.fitness.end(), 0.0) /
                           static_cast<double>(next.fitness.size());
    record->violations = violations;
  }
  return next;
}

SearchResult run_search(const Graph& base, const AttackScope& scope, const GAConfig& cfg,
                        const SearchProblem& problem) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, "ga");
  Population pop = init_population(base, scope, cfg, rng);
  if (scope.e_loc) {
    const FrequencyScores none;
    for (auto& cand : pop.candidates) {
      cand = local_project(cand, base, scope, none, rng, cfg.t_warm > 0, cfg.projection_attempts);
    }
  }
  evaluate_initial(pop, problem);

  SearchResult result;
  GenerationRecord rec0;
  rec0.generation = 0;
  rec0.best_fitness = pop.best_fitness;
  rec0.mean_fitness = std::accumulate(pop.fitness.begin(), pop.fitness.end(), 0.0) /
                      static_cast<double>(pop.fitness.size());
  result.telemetry.push_back(rec0);

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    if (cfg.stop_above && pop.best_fitness > *cfg.stop_above) break;
    GenerationRecord rec;
    pop = step(pop, base, scope, cfg, problem, rng, &rec);
    result.telemetry.push_back(rec);
  }
  result.best = pop.best;
  result.best_fitness = pop.best_fitness;
  result.final_population = std::move(pop);
  return result;
}

}  // namespace evagraph
