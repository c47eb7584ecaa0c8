#include "evagraph/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <thread>

#include "evagraph/incremental.hpp"
#include "evagraph/smoothing.hpp"

namespace evagraph {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_conformal(FitnessKind k) {
  return k == FitnessKind::conformal_coverage || k == FitnessKind::conformal_set_size;
}

std::vector<std::int64_t> labels_of(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<std::int64_t> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) {
    const auto y = g.labels()[v];
    if (y < 0) throw ConfigError("node " + std::to_string(v) + " has no label");
    out.push_back(y);
  }
  return out;
}

std::vector<NodeId> calibration_nodes(const Graph& g, const AttackScope& scope) {
  auto v_u = g.nodes_in(Split::unlabeled);
  if (v_u.empty()) throw ConfigError("conformal attack needs a nonempty unlabeled set");
  for (NodeId v : v_u) {
    if (std::binary_search(scope.v_att.begin(), scope.v_att.end(), v)) {
      throw ConfigError("conformal attack: v_att and the unlabeled set overlap");
    }
  }
  return v_u;
}

std::vector<std::int64_t> clean_predictions(const ModelWeights& w, const Graph& g, std::span<const NodeId> nodes) {
  const Matrix logits = forward(w, g);
  std::vector<std::int64_t> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) out.push_back(argmax_row(logits, v));
  return out;
}

struct Context {
  FitnessSpec spec;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  Graph g;
  std::vector<NodeId> att;
  std::vector<std::int64_t> att_labels;
  std::vector<std::int64_t> cal_labels;
  std::unique_ptr<IncrementalEvaluator> ev;
  std::unique_ptr<SmoothedClassifier> smooth;

  Eigen::Index att_rows() const { return static_cast<Eigen::Index>(att.size()); }

  double fitness(const Candidate& cand, std::size_t generation, std::size_t slot) const {
    const auto flips = decode_flips(cand, n);
    switch (spec.kind) {
      case FitnessKind::accuracy: return fit_accuracy(ev->logits(flips), att_labels);
      case FitnessKind::cross_entropy: return fit_cross_entropy(ev->logits(flips), att_labels);
      case FitnessKind::tanh_margin: return fit_tanh_margin(ev->logits(flips), att_labels);
      case FitnessKind::conformal_coverage:
      case FitnessKind::conformal_set_size: {
        const Matrix lg = ev->logits(flips);
        const Matrix test = lg.topRows(att_rows());
        const Matrix cal = lg.bottomRows(lg.rows() - att_rows());
        return spec.kind == FitnessKind::conformal_coverage
                   ? fit_conformal_coverage(cal, cal_labels, test, att_labels, spec.alpha)
                   : fit_conformal_set_size(cal, cal_labels, test, att_labels, spec.alpha);
      }
      case FitnessKind::certified_ratio: {
        Rng rng = make_rng(seed, "smoothing.resample", {generation, slot});
        const auto view = adaptive_resample(smooth->cache(), g, flips, rng);
        double f = fit_certified_ratio(smooth->probabilities(view), spec.smoothing.pbar);
        if (spec.smoothing.lambda > 0.0) f -= spec.smoothing.lambda * fit_accuracy(ev->logits(flips), att_labels);
        return f;
      }
    }
    return 0.0;
  }

  std::vector<NodeId> misclassified(const Candidate& cand) const {
    const Matrix lg = ev->logits(cand);
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < att.size(); ++i) {
      if (argmax_row(lg, static_cast<Eigen::Index>(i)) != att_labels[i]) out.push_back(att[i]);
    }
    return out;
  }
};

struct VoteSummary {
  std::vector<double> vote_prob;  // fraction voting for the reference class
  std::vector<std::int64_t> majority;
};

VoteSummary smooth_votes(const ModelWeights& w, const Graph& g, const SmoothingCache& cache,
                         std::span<const NodeId> nodes, std::span<const std::int64_t> vote_class) {
  const auto classes = static_cast<std::size_t>(w.num_classes());
  std::vector<std::size_t> counts(nodes.size() * classes, 0);
  const std::size_t m = cache.num_samples();
  constexpr std::size_t kPass = 64;
  for (std::size_t start = 0; start < m; start += kPass) {
    std::vector<Candidate> batch;
    for (std::size_t i = start; i < std::min(m, start + kPass); ++i) batch.push_back(cache.sample_candidate(i));
    for (const auto& lg : stacked_forward(w, g, batch, nodes, kPass)) {
      for (std::size_t t = 0; t < nodes.size(); ++t) {
        ++counts[t * classes + static_cast<std::size_t>(argmax_row(lg, static_cast<Eigen::Index>(t)))];
      }
    }
  }
  VoteSummary out;
  out.vote_prob.resize(nodes.size());
  out.majority.resize(nodes.size());
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    const auto* row = counts.data() + t * classes;
    out.vote_prob[t] = static_cast<double>(row[vote_class[t]]) / static_cast<double>(m);
    out.majority[t] = std::max_element(row, row + classes) - row;
  }
  return out;
}

void finish(AttackResult& res, const Graph& g, const ModelWeights& w, const AttackScope& scope,
            const FitnessSpec& spec) {
  const auto flips = decode_flips(res.best, g.num_nodes());
  res.flips = tag_flips(g, flips);
  res.clean_metrics = evaluate_metrics(w, g, {}, scope, spec, res.seed);
  res.attacked_metrics = evaluate_metrics(w, g, flips, scope, spec, res.seed);
  res.attacked_metrics["fitness"] = res.best_fitness;
}

AttackResult run_attack(const Graph& g, const ModelWeights& w, const AttackScope& scope, const FitnessSpec& spec,
                        const GAConfig& ga, const std::string& mode) {
  const auto start = Clock::now();
  spec.validate();
  ga.validate();
  AttackResult res;
  res.mode = mode;
  res.objective = spec.kind;
  res.seed = ga.seed;
  res.delta = scope.delta;
  const auto problem = make_problem(w, g, scope, spec, ga.seed, ga.workers, &res.evaluations);
  const auto sr = run_search(g, scope, ga, problem);
  res.best = sr.best;
  res.best_fitness = sr.best_fitness;
  res.telemetry = sr.telemetry;
  finish(res, g, w, scope, spec);
  res.wall_seconds = seconds_since(start);
  return res;
}

}  // namespace

double AttackResult::clean_metric() const {
  auto it = clean_metrics.find(primary_metric(objective));
  return it == clean_metrics.end() ? 0.0 : it->second;
}

double AttackResult::attacked_metric() const {
  auto it = attacked_metrics.find(primary_metric(objective));
  return it == attacked_metrics.end() ? 0.0 : it->second;
}

std::string primary_metric(FitnessKind kind) {
  switch (kind) {
    case FitnessKind::conformal_coverage: return "coverage";
    case FitnessKind::conformal_set_size: return "set_size";
    case FitnessKind::certified_ratio: return "certified_ratio";
    default: return "accuracy";
  }
}

std::vector<Flip> tag_flips(const Graph& g, std::span<const NodePair> distinct_flips) {
  std::vector<Flip> out;
  out.reserve(distinct_flips.size());
  for (const auto& p : distinct_flips) out.push_back({p.r, p.c, !g.has_edge(p.r, p.c)});
  std::sort(out.begin(), out.end(), [](const Flip& a, const Flip& b) { return std::tie(a.r, a.c) < std::tie(b.r, b.c); });
  return out;
}

SearchProblem make_problem(const ModelWeights& w, const Graph& g, const AttackScope& scope, const FitnessSpec& spec,
                           std::uint64_t seed, std::size_t workers, std::size_t* evaluations) {
  spec.validate();
  if (scope.v_att.empty()) throw ConfigError("attack scope: v_att is empty");
  auto ctx = std::make_shared<Context>();
  ctx->spec = spec;
  ctx->seed = seed;
  ctx->n = g.num_nodes();
  ctx->g = g;
  ctx->att = scope.v_att;
  ctx->att_labels = labels_of(g, scope.v_att);

  std::vector<NodeId> requested = scope.v_att;
  if (is_conformal(spec.kind)) {
    const auto v_u = calibration_nodes(g, scope);
    ctx->cal_labels = labels_of(g, v_u);
    requested.insert(requested.end(), v_u.begin(), v_u.end());
  }
  const auto z = IncrementalEvaluator::feature_transform(w, g);
  ctx->ev = std::make_unique<IncrementalEvaluator>(w, g, requested, z);
  if (spec.kind == FitnessKind::certified_ratio) {
    const auto& sp = spec.smoothing;
    auto cache = smoothing_sample(g, sp.p_plus, sp.p_minus, sp.samples_attack, derive_seed(seed, "smoothing.attack"));
    ctx->smooth = std::make_unique<SmoothedClassifier>(w, g, std::move(cache), scope.v_att,
                                                       clean_predictions(w, g, scope.v_att));
  }

  workers = std::max<std::size_t>(1, workers);
  SearchProblem problem;
  problem.evaluate = [ctx, workers, evaluations](std::span<const Candidate> cands, std::size_t generation,
                                                 std::size_t first_slot) {
    std::vector<double> out(cands.size());
    auto run = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) out[i] = ctx->fitness(cands[i], generation, first_slot + i);
    };
    const std::size_t threads = std::min(workers, cands.size());
    if (threads <= 1) {
      run(0, cands.size());
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(threads);
      const std::size_t per = (cands.size() + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            run(t * per, std::min(cands.size(), (t + 1) * per));
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    if (evaluations) *evaluations += cands.size();
    return out;
  };
  problem.misclassified = [ctx](const Candidate& cand) { return ctx->misclassified(cand); };
  return problem;
}

std::map<std::string, double> evaluate_metrics(const ModelWeights& w, const Graph& g0,
                                               std::span<const NodePair> flips, const AttackScope& scope,
                                               const FitnessSpec& spec, std::uint64_t seed) {
  const Graph g1 = apply_flips(g0, flips);
  const Matrix logits = forward(w, g1);
  const auto labels = labels_of(g0, scope.v_att);
  std::map<std::string, double> out;
  out["accuracy"] = accuracy(logits, g0.labels(), scope.v_att);

  if (is_conformal(spec.kind)) {
    // The defender calibrates on a random half of the unlabeled nodes.
    auto v_u = calibration_nodes(g0, scope);
    Rng rng = make_rng(seed, "conformal.final");
    std::shuffle(v_u.begin(), v_u.end(), rng);
    v_u.resize(std::max<std::size_t>(1, (v_u.size() + 1) / 2));
    Matrix cal(static_cast<Eigen::Index>(v_u.size()), logits.cols());
    for (std::size_t i = 0; i < v_u.size(); ++i) cal.row(static_cast<Eigen::Index>(i)) = logits.row(v_u[i]);
    Matrix test(static_cast<Eigen::Index>(scope.v_att.size()), logits.cols());
    for (std::size_t i = 0; i < scope.v_att.size(); ++i) {
      test.row(static_cast<Eigen::Index>(i)) = logits.row(scope.v_att[i]);
    }
    const auto oc = conformal_evaluate(cal, labels_of(g0, v_u), test, labels, spec.alpha);
    out["coverage"] = oc.coverage;
    out["set_size"] = oc.mean_set_size;
    out["tau"] = oc.tau;
  }

  if (spec.kind == FitnessKind::certified_ratio) {
    const auto& sp = spec.smoothing;
    const auto vote = clean_predictions(w, g0, scope.v_att);
    const auto cache = smoothing_sample(g1, sp.p_plus, sp.p_minus, sp.samples_final, derive_seed(seed, "smoothing.final"));
    const auto votes = smooth_votes(w, g1, cache, scope.v_att, vote);
    out["certified_ratio"] = 1.0 - fit_certified_ratio(votes.vote_prob, sp.pbar);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += votes.majority[i] == labels[i] ? 1 : 0;
    out["smooth_accuracy"] = static_cast<double>(correct) / static_cast<double>(labels.size());
  }
  return out;
}

AttackResult attack_global(const Graph& g, const ModelWeights& w, const AttackScope& scope, const FitnessSpec& spec,
                           const GAConfig& ga) {
  AttackScope global = scope;
  global.e_loc.reset();
  return run_attack(g, w, global, spec, ga, "global");
}

AttackResult attack_local(const Graph& g, const ModelWeights& w, const AttackScope& scope, const FitnessSpec& spec,
                          const GAConfig& ga) {
  if (!scope.e_loc) throw ConfigError("local attack requires e_loc");
  auto res = run_attack(g, w, scope, spec, ga, "local");
  const auto v = count_local_violations(g, apply_perturbation(g, res.best), *scope.e_loc);
  if (v.total != 0) throw Error("local attack produced a candidate with local violations");
  res.attacked_metrics["local_violations"] = 0.0;
  return res;
}

AttackResult attack_targeted(const Graph& g, const ModelWeights& w, NodeId node, std::uint64_t max_budget,
                             const GAConfig& ga, TargetedSearch search) {
  const auto start = Clock::now();
  ga.validate();
  if (node >= g.num_nodes()) throw InvalidIndexError("targeted attack: node out of range");
  FitnessSpec spec;
  spec.kind = FitnessKind::tanh_margin;
  AttackResult res;
  res.mode = search == TargetedSearch::evolutionary ? "targeted" : "targeted-random";
  res.objective = spec.kind;
  res.seed = ga.seed;
  res.target = node;
  const auto base_scope = AttackScope::with_budget(g, {node}, 0);
  const auto label = labels_of(g, base_scope.v_att).front();

  const auto correct_on = [&](const Candidate& cand) {
    return argmax_row(forward(w, apply_perturbation(g, cand)), node) == label;
  };

  if (!correct_on({})) {
    res.minimal_budget = 0;
  } else {
    for (std::uint64_t delta = 1; delta <= max_budget; ++delta) {
      const auto scope = AttackScope::with_budget(g, {node}, delta);
      GAConfig cfg = ga;
      cfg.seed = derive_seed(ga.seed, "targeted", {delta});
      cfg.stop_above = 0.0;
      if (search == TargetedSearch::evolutionary) {
        const auto problem = make_problem(w, g, scope, spec, cfg.seed, cfg.workers, &res.evaluations);
        const auto sr = run_search(g, scope, cfg, problem);
        res.best = sr.best;
        res.best_fitness = sr.best_fitness;
        res.telemetry = sr.telemetry;
      } else {
        // Same evaluation allowance as the GA at this budget.
        const std::size_t trials = cfg.population + cfg.steps * (cfg.population - cfg.elites());
        auto rnd = attack_random_baseline(g, w, scope, spec, trials, cfg.seed);
        res.best = rnd.best;
        res.best_fitness = rnd.best_fitness;
        res.evaluations += rnd.evaluations;
      }
      res.delta = delta;
      if (!correct_on(res.best)) {
        res.minimal_budget = delta;
        break;
      }
    }
  }
  if (!res.minimal_budget) res.warnings.push_back("NA: prediction unchanged up to the maximum budget");
  if (res.minimal_budget == std::uint64_t{0}) res.best = {};
  finish(res, g, w, base_scope, spec);
  res.wall_seconds = seconds_since(start);
  return res;
}

DnCPlan plan_dnc(const Graph& g, const AttackScope& scope, std::size_t k_dc, std::uint64_t seed) {
  if (k_dc < 1) throw ConfigError("k_dc must be >= 1");
  if (scope.v_att.empty()) throw ConfigError("attack scope: v_att is empty");
  DnCPlan plan;
  plan.k_dc = std::min(k_dc, scope.v_att.size());
  if (plan.k_dc == 1) {
    plan.chunks = {scope.v_att};
    plan.budgets = {scope.delta};
    return plan;
  }
  std::vector<NodeId> perm = scope.v_att;
  Rng rng = make_rng(seed, "dnc.plan");
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_below<std::size_t>(rng, i)]);

  const std::size_t k = plan.k_dc;
  std::vector<std::int64_t> chunk_of(g.num_nodes(), -1);
  plan.chunks.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t lo = j * perm.size() / k;
    const std::size_t hi = (j + 1) * perm.size() / k;
    plan.chunks[j].assign(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(plan.chunks[j].begin(), plan.chunks[j].end());
    for (NodeId v : plan.chunks[j]) chunk_of[v] = static_cast<std::int64_t>(j);
  }

  // Twice the edge share of each chunk, and its edges to other chunks.
  std::vector<std::uint64_t> twice(k, 0);
  std::vector<std::uint64_t> cross(k, 0);
  for (const auto& e : g.edge_list()) {
    const auto a = chunk_of[e.r];
    const auto b = chunk_of[e.c];
    if (a >= 0 && b >= 0 && a != b) {
      ++twice[static_cast<std::size_t>(a)];
      ++twice[static_cast<std::size_t>(b)];
      ++cross[static_cast<std::size_t>(a)];
      ++cross[static_cast<std::size_t>(b)];
    } else if (a >= 0 || b >= 0) {
      twice[static_cast<std::size_t>(a >= 0 ? a : b)] += 2;
    }
  }
  plan.budgets.resize(k);
  std::vector<double> remainder(k);
  std::uint64_t total = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double share = scope.epsilon * static_cast<double>(twice[j]) / 2.0;
    plan.budgets[j] = static_cast<std::uint64_t>(std::floor(share + 1e-9));
    remainder[j] = share - static_cast<double>(plan.budgets[j]);
    total += plan.budgets[j];
  }
  // Largest remainders take the flips lost to rounding, never above the
  // budget of the chunk attacked on its own.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t j : order) {
    if (total >= scope.delta) break;
    if (plan.budgets[j] + 1 <= budget_for(scope.epsilon, (twice[j] + cross[j]) / 2)) {
      ++plan.budgets[j];
      ++total;
    }
  }
  while (total > scope.delta) {
    auto it = std::max_element(plan.budgets.begin(), plan.budgets.end());
    --*it;
    --total;
  }
  return plan;
}

AttackResult attack_dnc(const Graph& g, const ModelWeights& w, const AttackScope& scope, const DnCPlan& plan,
                        const FitnessSpec& spec, const GAConfig& ga) {
  const auto start = Clock::now();
  spec.validate();
  ga.validate();
  if (scope.e_loc) throw ConfigError("divide and conquer does not support local budgets");
  if (plan.chunks.empty() || plan.chunks.size() != plan.budgets.size()) throw ConfigError("malformed D&C plan");

  AttackResult res;
  res.mode = "dnc";
  res.objective = spec.kind;
  res.seed = ga.seed;
  res.delta = std::accumulate(plan.budgets.begin(), plan.budgets.end(), std::uint64_t{0});

  const std::size_t k = plan.chunks.size();
  const std::size_t pop = ga.population;
  const std::size_t per_step = pop - ga.elites();
  const std::size_t allowance = pop + ga.steps * per_step;
  const std::size_t total_steps = allowance > k * pop ? (allowance - k * pop) / per_step : 0;

  Graph current = g;
  for (std::size_t i = 0; i < k; ++i) {
    ChunkReport rep;
    rep.nodes = plan.chunks[i];
    rep.delta = plan.budgets[i];
    rep.steps = total_steps / k + (i < total_steps % k ? 1 : 0);
    if (rep.delta > 0 && !rep.nodes.empty()) {
      const auto chunk_scope = AttackScope::with_budget(current, rep.nodes, rep.delta);
      GAConfig cfg = ga;
      cfg.seed = i == 0 ? ga.seed : derive_seed(ga.seed, "dnc.chunk", {i});
      cfg.steps = rep.steps;
      const auto problem = make_problem(w, current, chunk_scope, spec, cfg.seed, cfg.workers, &res.evaluations);
      const auto sr = run_search(current, chunk_scope, cfg, problem);
      const auto flips = decode_flips(sr.best, current.num_nodes());
      current = apply_flips(current, flips);
      rep.best_fitness = sr.best_fitness;
      rep.flips = flips.size();
      rep.telemetry = sr.telemetry;
      res.telemetry.insert(res.telemetry.end(), sr.telemetry.begin(), sr.telemetry.end());
      if (k == 1) {
        res.best = sr.best;
        res.best_fitness = sr.best_fitness;
      }
    }
    res.chunks.push_back(std::move(rep));
  }

  if (k > 1) {
    for (const auto& p : symmetric_difference(g, current)) res.best.genes.push_back(pi_index(p.r, p.c, g.num_nodes()));
    // Fitness of the combined perturbation over the whole v_att.
    const auto problem = make_problem(w, g, scope, spec, ga.seed, 1, nullptr);
    res.best_fitness = problem.evaluate(std::span<const Candidate>(&res.best, 1), 0, 0).front();
  }
  finish(res, g, w, scope, spec);
  res.wall_seconds = seconds_since(start);
  return res;
}

AttackResult attack_random_baseline(const Graph& g, const ModelWeights& w, const AttackScope& scope,
                                    const FitnessSpec& spec, std::size_t trials, std::uint64_t seed) {
  const auto start = Clock::now();
  if (trials < 1) throw ConfigError("random baseline needs at least one trial");
  AttackResult res;
  res.mode = "random";
  res.objective = spec.kind;
  res.seed = seed;
  res.delta = scope.delta;
  const auto problem = make_problem(w, g, scope, spec, seed, 1, &res.evaluations);
  Rng rng = make_rng(seed, "random.baseline");
  const FrequencyScores none;
  const std::size_t n = g.num_nodes();
  res.best_fitness = -std::numeric_limits<double>::infinity();
  constexpr std::size_t kBatch = 256;
  for (std::size_t done = 0; done < trials;) {
    const std::size_t count = std::min(kBatch, trials - done);
    std::vector<Candidate> batch(count);
    for (auto& cand : batch) {
      cand.genes.resize(scope.delta);
      for (auto& gene : cand.genes) gene = targeted_gene(scope.v_att, n, rng);
      if (scope.e_loc) cand = local_project(cand, g, scope, none, rng, false);
    }
    const auto fit = problem.evaluate(batch, 0, done);
    for (std::size_t i = 0; i < count; ++i) {
      if (fit[i] > res.best_fitness) {
        res.best_fitness = fit[i];
        res.best = batch[i];
      }
    }
    done += count;
    GenerationRecord rec;
    rec.generation = done;
    rec.best_fitness = res.best_fitness;
    rec.mean_fitness = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(count);
    res.telemetry.push_back(rec);
  }
  finish(res, g, w, scope, spec);
  res.wall_seconds = seconds_since(start);
  return res;
}

AttackResult attack_certificate(const Graph& g, const ModelWeights& w, const AttackScope& scope,
                                const SmoothingParams& params, const GAConfig& ga) {
  FitnessSpec spec;
  spec.kind = FitnessKind::certified_ratio;
  spec.smoothing = params;
  auto res = run_attack(g, w, scope, spec, ga, scope.e_loc ? "local" : "global");
  if (params.pbar <= 0.5 + 1e-3) {
    res.warnings.push_back("degenerate configuration: pbar close to 0.5 certifies nearly every node");
  }
  return res;
}

AttackResult attack_conformal(const Graph& g, const ModelWeights& w, const AttackScope& scope, double alpha,
                              FitnessKind objective, const GAConfig& ga) {
  if (!is_conformal(objective)) throw ConfigError("conformal attack needs a conformal objective");
  FitnessSpec spec;
  spec.kind = objective;
  spec.alpha = alpha;
  return run_attack(g, w, scope, spec, ga, scope.e_loc ? "local" : "global");
}

}  // namespace evagraph
