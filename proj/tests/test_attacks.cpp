#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "evagraph/attacks.hpp"
#include "support.hpp"

using namespace evagraph;

namespace {

const testing::Toy& toy() {
  static const testing::Toy t = testing::make_toy(31);
  return t;
}

GAConfig small_ga(std::uint64_t seed) {
  GAConfig cfg;
  cfg.population = 32;
  cfg.steps = 25;
  cfg.elite_count = 2;
  cfg.crossover_joints = 4;
  cfg.mutation_rate = 0.1;
  cfg.seed = seed;
  return cfg;
}

AttackScope test_scope(const Graph& g, double eps, std::optional<double> e_loc = std::nullopt) {
  return AttackScope::make(g, g.nodes_in(Split::test), eps, e_loc);
}

// Identity GCN on two features: the prediction is the argmax of smoothed features.
ModelWeights identity_gcn() {
  ModelWeights w;
  w.kind = ModelKind::gcn;
  w.W0 = MatrixT<float>::Identity(2, 2);
  w.b0 = RowVectorT<float>::Zero(2);
  w.W1 = MatrixT<float>::Identity(2, 2);
  w.b1 = RowVectorT<float>::Zero(2);
  return w;
}

Graph tiny_graph(std::vector<NodePair> edges, std::vector<std::array<float, 2>> x, std::vector<std::int64_t> y) {
  const std::size_t n = x.size();
  auto feats = std::make_shared<Matrix>(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    (*feats)(static_cast<Eigen::Index>(i), 0) = x[i][0];
    (*feats)(static_cast<Eigen::Index>(i), 1) = x[i][1];
  }
  return Graph::from_edges(n, edges, feats, y, testing::all_test(n));
}

bool node_correct(const ModelWeights& w, const Graph& g, NodeId v) {
  Eigen::Index c;
  forward(w, g).row(v).maxCoeff(&c);
  return c == g.labels()[v];
}

void check_budget(const AttackResult& r, std::uint64_t delta) {
  CHECK(r.flips.size() <= delta);
  CHECK(distinct_genes(r.best).size() <= delta);
}

}  // namespace

TEST_CASE("zero budget leaves every metric at its clean value") {
  const auto& t = toy();
  const auto scope = AttackScope::with_budget(t.g, t.g.nodes_in(Split::test), 0);
  FitnessSpec spec;
  const auto r = attack_global(t.g, t.w, scope, spec, small_ga(1));
  CHECK(r.flips.empty());
  CHECK(r.attacked_metric() == r.clean_metric());

  const auto c = attack_conformal(t.g, t.w, scope, 0.1, FitnessKind::conformal_coverage, small_ga(1));
  CHECK(c.attacked_metrics.at("coverage") == c.clean_metrics.at("coverage"));
  CHECK(c.attacked_metrics.at("set_size") == c.clean_metrics.at("set_size"));

  const auto rnd = attack_random_baseline(t.g, t.w, scope, spec, 1, 3);
  CHECK(rnd.attacked_metric() == rnd.clean_metric());
}

TEST_CASE("global attack is self-consistent and within budget") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.1);
  REQUIRE(scope.delta > 0);
  FitnessSpec spec;
  for (std::uint64_t seed : {1, 2}) {
    const auto r = attack_global(t.g, t.w, scope, spec, small_ga(seed));
    check_budget(r, scope.delta);
    CHECK(r.mode == "global");
    std::vector<NodePair> pairs;
    for (const auto& f : r.flips) {
      CHECK(f.add == !t.g.has_edge(f.r, f.c));
      pairs.push_back({f.r, f.c});
    }
    const auto again = evaluate_metrics(t.w, t.g, pairs, scope, spec, r.seed);
    CHECK(again.at("accuracy") == r.attacked_metrics.at("accuracy"));
    CHECK(r.best_fitness == doctest::Approx(1.0 - r.attacked_metric()));
    CHECK(r.attacked_metric() <= r.clean_metric());
    CHECK(r.evaluations == 32 + 25 * 30);
    for (std::size_t i = 1; i < r.telemetry.size(); ++i) {
      CHECK(r.telemetry[i].best_fitness >= r.telemetry[i - 1].best_fitness);
    }
    // Every flip touches the attacked set.
    for (const auto& f : r.flips) {
      CHECK((std::binary_search(scope.v_att.begin(), scope.v_att.end(), f.r) ||
             std::binary_search(scope.v_att.begin(), scope.v_att.end(), f.c)));
    }
  }
}

TEST_CASE("worker count does not change results") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.1);
  FitnessSpec spec;
  auto one = small_ga(4);
  auto many = one;
  many.workers = 4;
  const auto a = attack_global(t.g, t.w, scope, spec, one);
  const auto b = attack_global(t.g, t.w, scope, spec, many);
  CHECK(a.best == b.best);
  CHECK(a.best_fitness == b.best_fitness);
}

TEST_CASE("local attack ends without violations") {
  const auto& t = toy();
  FitnessSpec spec;
  for (double e_loc : {0.5, 0.25}) {
    const auto scope = test_scope(t.g, 0.1, e_loc);
    const auto r = attack_local(t.g, t.w, scope, spec, small_ga(5));
    check_budget(r, scope.delta);
    CHECK(r.mode == "local");
    std::vector<NodePair> pairs;
    for (const auto& f : r.flips) pairs.push_back({f.r, f.c});
    CHECK(count_local_violations(t.g, apply_flips(t.g, pairs), e_loc).total == 0);
  }
  CHECK_THROWS_AS(attack_local(t.g, t.w, test_scope(t.g, 0.1), spec, small_ga(5)), ConfigError);
}

TEST_CASE("zero local budget never raises a degree") {
  const auto& t = toy();
  std::vector<NodeId> v_att;
  for (NodeId v : t.g.nodes_in(Split::test)) {
    if (t.g.degree(v) >= 1) v_att.push_back(v);
  }
  const auto scope = AttackScope::make(t.g, v_att, 0.1, 0.0);
  FitnessSpec spec;
  const auto r = attack_local(t.g, t.w, scope, spec, small_ga(6));
  CHECK_FALSE(r.flips.empty());
  std::vector<NodePair> pairs;
  std::size_t adds = 0;
  for (const auto& f : r.flips) {
    pairs.push_back({f.r, f.c});
    adds += f.add ? 1 : 0;
  }
  // An addition survives only when removals at both endpoints pay for it.
  CHECK(2 * adds <= r.flips.size());
  const auto g1 = apply_flips(t.g, pairs);
  for (NodeId v = 0; v < t.g.num_nodes(); ++v) REQUIRE(g1.degree(v) <= t.g.degree(v));
}

TEST_CASE("targeted attack: budget zero for a misclassified node") {
  const auto w = identity_gcn();
  const auto g = tiny_graph({{0, 1}}, {{1, 0}, {0, 1}, {0, 1}, {0, 1}}, {1, 1, 1, 0});
  REQUIRE_FALSE(node_correct(w, g, 3));
  const auto r = attack_targeted(g, w, 3, 5, small_ga(1));
  REQUIRE(r.minimal_budget.has_value());
  CHECK(*r.minimal_budget == 0);
  CHECK(r.flips.empty());
  CHECK(r.warnings.empty());
}

TEST_CASE("targeted attack: removing the one decisive edge") {
  // Node 0 leans to class 0 on its own; its only neighbour pulls it to class 1.
  // Every other node carries class-1 features, so additions only reinforce.
  const auto w = identity_gcn();
  const auto g = tiny_graph({{0, 1}}, {{0.1f, 0}, {0, 1}, {0, 1}, {0, 1}, {0, 1}, {0, 1}}, {1, 1, 1, 1, 1, 1});
  REQUIRE(node_correct(w, g, 0));
  for (auto search : {TargetedSearch::evolutionary, TargetedSearch::random}) {
    const auto r = attack_targeted(g, w, 0, 10, small_ga(2), search);
    REQUIRE(r.minimal_budget.has_value());
    CHECK(*r.minimal_budget == 1);
    REQUIRE(r.flips.size() == 1);
    CHECK(r.flips[0].r == 0);
    CHECK(r.flips[0].c == 1);
    CHECK_FALSE(r.flips[0].add);
  }
}

TEST_CASE("targeted attack: no single flip succeeds") {
  const auto w = identity_gcn();
  const auto g = tiny_graph({{0, 1}, {2, 3}}, {{5, 0}, {0, 1}, {0, 1}, {0, 1}, {0, 1}, {0, 1}}, {0, 1, 1, 1, 1, 1});
  REQUIRE(node_correct(w, g, 0));
  const std::size_t n = g.num_nodes();
  for (LinearIndex l = 0; l < pair_count(n); ++l) {
    REQUIRE(node_correct(w, apply_perturbation(g, Candidate{{l}}), 0));
  }
  const auto r = attack_targeted(g, w, 0, 1, small_ga(3));
  CHECK_FALSE(r.minimal_budget.has_value());
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].rfind("NA", 0) == 0);
}

TEST_CASE("D&C plan partitions the attacked set within budget") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = testing::random_graph(80, 0.08, 2, 2, 700 + seed);
    std::vector<NodeId> v_att;
    for (NodeId v = 0; v < 80; v += 1 + seed % 3) v_att.push_back(v);
    const auto scope = AttackScope::make(g, v_att, 0.05 + 0.01 * static_cast<double>(seed % 5));
    for (std::size_t k : {1, 2, 3, 4, 7}) {
      const auto plan = plan_dnc(g, scope, k, seed);
      CHECK(plan.chunks.size() == k);
      std::vector<NodeId> all;
      std::size_t lo = v_att.size();
      std::size_t hi = 0;
      for (const auto& c : plan.chunks) {
        all.insert(all.end(), c.begin(), c.end());
        lo = std::min(lo, c.size());
        hi = std::max(hi, c.size());
      }
      std::sort(all.begin(), all.end());
      CHECK(all == v_att);
      CHECK(hi - lo <= 1);
      std::uint64_t sum = 0;
      for (std::size_t j = 0; j < k; ++j) {
        sum += plan.budgets[j];
        CHECK(plan.budgets[j] <= budget_for(scope.epsilon, incident_edge_count(g, plan.chunks[j])));
      }
      CHECK(sum <= scope.delta);
      CHECK(sum + k > scope.delta);
    }
  }
  const auto g = testing::random_graph(10, 0.3, 2, 2, 1);
  CHECK_THROWS_AS(plan_dnc(g, AttackScope::make(g, {0, 1}, 0.1), 0, 1), ConfigError);
}

TEST_CASE("D&C with one chunk matches the global attack") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.1);
  FitnessSpec spec;
  const auto ga = small_ga(7);
  const auto global = attack_global(t.g, t.w, scope, spec, ga);
  const auto dnc = attack_dnc(t.g, t.w, scope, plan_dnc(t.g, scope, 1, 7), spec, ga);
  CHECK(dnc.best == global.best);
  CHECK(dnc.best_fitness == global.best_fitness);
  CHECK(dnc.attacked_metrics == global.attacked_metrics);
  CHECK(dnc.evaluations == global.evaluations);
}

TEST_CASE("D&C with several chunks stays within the summed budget") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.2);
  FitnessSpec spec;
  const auto ga = small_ga(8);
  const auto plan = plan_dnc(t.g, scope, 3, 8);
  const auto r = attack_dnc(t.g, t.w, scope, plan, spec, ga);
  std::uint64_t sum = 0;
  for (auto b : plan.budgets) sum += b;
  CHECK(r.flips.size() <= sum);
  CHECK(r.chunks.size() == 3);
  CHECK(r.evaluations <= 32 + 25 * 30);
  CHECK(r.best_fitness == doctest::Approx(1.0 - r.attacked_metric()));
  CHECK_THROWS_AS(attack_dnc(t.g, t.w, test_scope(t.g, 0.2, 0.5), plan, spec, ga), ConfigError);
}

TEST_CASE("random baseline: prefix dominance and EvA comparison") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.1);
  FitnessSpec spec;
  const auto few = attack_random_baseline(t.g, t.w, scope, spec, 10, 9);
  const auto many = attack_random_baseline(t.g, t.w, scope, spec, 1000, 9);
  CHECK(many.best_fitness >= few.best_fitness);
  CHECK(many.evaluations == 1000);
  check_budget(many, scope.delta);

  for (std::uint64_t seed : {11, 12, 13}) {
    const auto ga = small_ga(seed);
    const auto eva = attack_global(t.g, t.w, scope, spec, ga);
    const auto rnd = attack_random_baseline(t.g, t.w, scope, spec, eva.evaluations, seed);
    CHECK(eva.attacked_metric() <= rnd.attacked_metric());
  }
}

TEST_CASE("conformal attack lowers coverage") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.2);
  const auto r = attack_conformal(t.g, t.w, scope, 0.1, FitnessKind::conformal_coverage, small_ga(14));
  CHECK(r.attacked_metrics.at("coverage") <= r.clean_metrics.at("coverage"));
  CHECK(r.clean_metric() == r.clean_metrics.at("coverage"));
  const auto s = attack_conformal(t.g, t.w, scope, 0.1, FitnessKind::conformal_set_size, small_ga(14));
  CHECK(s.attacked_metrics.at("set_size") >= s.clean_metrics.at("set_size"));
  CHECK_THROWS_AS(attack_conformal(t.g, t.w, scope, 0.1, FitnessKind::accuracy, small_ga(14)), ConfigError);
}

TEST_CASE("certificate attack") {
  const auto& t = toy();
  const auto scope = test_scope(t.g, 0.1);
  SmoothingParams exact;
  exact.p_plus = 0.0;
  exact.p_minus = 0.0;
  exact.samples_attack = 4;
  exact.samples_final = 4;
  auto ga = small_ga(15);
  ga.steps = 2;
  const auto r = attack_certificate(t.g, t.w, scope, exact, ga);
  CHECK(r.clean_metrics.at("certified_ratio") == 1.0);
  CHECK(r.warnings.empty());

  SmoothingParams loose;
  loose.samples_attack = 20;
  loose.samples_final = 50;
  loose.pbar = 0.5005;
  const auto d = attack_certificate(t.g, t.w, scope, loose, ga);
  CHECK(d.warnings.size() == 1);
  CHECK(d.attacked_metrics.count("smooth_accuracy") == 1);
}
