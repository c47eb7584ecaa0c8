#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>

#include "evagraph/smoothing.hpp"
#include "support.hpp"

using namespace evagraph;
using testing::random_graph;
using testing::random_weights;

namespace {

std::vector<std::int64_t> clean_predictions(const ModelWeights& w, const Graph& g, std::span<const NodeId> nodes) {
  const Matrix z = forward(w, g);
  std::vector<std::int64_t> out;
  for (NodeId v : nodes) {
    Eigen::Index c;
    z.row(v).maxCoeff(&c);
    out.push_back(c);
  }
  return out;
}

std::vector<double> naive_probs(const ModelWeights& w, const Graph& g, const std::vector<std::vector<LinearIndex>>& flips,
                                std::span<const NodeId> nodes, std::span<const std::int64_t> vote) {
  std::vector<double> hits(nodes.size(), 0.0);
  for (const auto& f : flips) {
    const Matrix z = forward(w, apply_perturbation(g, Candidate{f}));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      Eigen::Index c;
      z.row(nodes[i]).maxCoeff(&c);
      if (c == vote[i]) hits[i] += 1.0;
    }
  }
  for (auto& h : hits) h /= static_cast<double>(flips.size());
  return hits;
}

}  // namespace

TEST_CASE("smoothing samples: degenerate parameters") {
  const auto g = random_graph(30, 0.2, 3, 2, 1);
  const auto none = smoothing_sample(g, 0.0, 0.0, 20, 5);
  CHECK(none.num_samples() == 20);
  for (const auto& f : none.flips) CHECK(f.empty());

  const auto wipe = smoothing_sample(g, 0.0, 1.0, 10, 5);
  for (std::size_t i = 0; i < wipe.num_samples(); ++i) {
    CHECK(apply_perturbation(g, wipe.sample_candidate(i)).num_edges() == 0);
  }
}

TEST_CASE("smoothing samples are reproducible, sorted and in range") {
  const auto g = random_graph(50, 0.1, 3, 2, 2);
  const auto a = smoothing_sample(g, 0.01, 0.3, 30, 11);
  const auto b = smoothing_sample(g, 0.01, 0.3, 30, 11);
  const auto c = smoothing_sample(g, 0.01, 0.3, 30, 12);
  CHECK(a.flips == b.flips);
  CHECK(a.flips != c.flips);
  for (const auto& f : a.flips) {
    CHECK(std::is_sorted(f.begin(), f.end()));
    CHECK(std::adjacent_find(f.begin(), f.end()) == f.end());
    for (auto l : f) CHECK(l < pair_count(50));
  }
  // A prefix of a larger cache is the smaller cache.
  const auto d = smoothing_sample(g, 0.01, 0.3, 10, 11);
  for (std::size_t i = 0; i < 10; ++i) CHECK(d.flips[i] == a.flips[i]);
}

TEST_CASE("sparse additions follow the binomial mean") {
  const std::size_t n = 2810;
  const auto g = random_graph(n, 0.002, 2, 2, 3);
  const double non_edges = static_cast<double>(pair_count(n) - g.num_edges());
  const double p = 0.001;
  const std::size_t m = 200;
  const auto cache = smoothing_sample(g, p, 0.0, m, 21);
  double total = 0.0;
  for (const auto& f : cache.flips) {
    for (auto l : f) {
      const auto e = pi_inverse(l, n);
      REQUIRE_FALSE(g.has_edge(e.r, e.c));
    }
    total += static_cast<double>(f.size());
  }
  const double mean = total / static_cast<double>(m);
  const double sigma = std::sqrt(non_edges * p * (1.0 - p) / static_cast<double>(m));
  CHECK(std::abs(mean - non_edges * p) <= 3.0 * sigma);
}

TEST_CASE("removals follow p_minus") {
  const auto g = random_graph(200, 0.05, 2, 2, 4);
  const std::size_t m = 400;
  const double p = 0.4;
  const auto cache = smoothing_sample(g, 0.0, p, m, 22);
  double removed = 0.0;
  for (const auto& f : cache.flips) removed += static_cast<double>(f.size());
  const double trials = static_cast<double>(g.num_edges() * m);
  CHECK(std::abs(removed / trials - p) <= 3.0 * std::sqrt(p * (1.0 - p) / trials));
}

TEST_CASE("adaptive resample with no change keeps the cache") {
  const auto g = random_graph(40, 0.1, 3, 2, 5);
  const auto cache = smoothing_sample(g, 0.02, 0.3, 25, 1);
  Rng rng(1);
  const auto view = adaptive_resample(cache, g, g, rng);
  CHECK(view.changed_pairs().empty());
  for (std::size_t i = 0; i < cache.num_samples(); ++i) {
    CHECK(view.flip_set(i) == cache.flips[i]);
    CHECK(view.relative_flips(i).empty());
  }
}

TEST_CASE("adaptive resample redraws only the changed pairs") {
  const std::size_t n = 40;
  const auto g0 = random_graph(n, 0.1, 3, 2, 6);
  const auto cache = smoothing_sample(g0, 0.05, 0.3, 50, 2);
  std::mt19937_64 pick_rng(3);
  std::uniform_int_distribution<LinearIndex> pick(0, pair_count(n) - 1);
  for (int t = 0; t < 20; ++t) {
    Candidate cand;
    for (int i = 0; i < 5; ++i) cand.genes.push_back(pick(pick_rng));
    const auto g1 = apply_perturbation(g0, cand);
    Rng rng(100 + t);
    const auto view = adaptive_resample(cache, g0, g1, rng);
    std::set<LinearIndex> changed;
    for (auto p : view.changed_pairs()) changed.insert(pi_index(p.r, p.c, n));
    const auto genes = distinct_genes(cand);
    CHECK(changed == std::set<LinearIndex>(genes.begin(), genes.end()));
    for (std::size_t i = 0; i < cache.num_samples(); ++i) {
      const auto mine = view.flip_set(i);
      std::vector<LinearIndex> diff;
      std::set_symmetric_difference(mine.begin(), mine.end(), cache.flips[i].begin(), cache.flips[i].end(),
                                    std::back_inserter(diff));
      for (auto l : diff) REQUIRE(changed.count(l) == 1);
      // Relative flips take the cached sample to the view's sample.
      const auto cached = apply_perturbation(g0, cache.sample_candidate(i));
      const auto target = apply_perturbation(g0, Candidate{mine});
      CHECK(apply_flips(cached, view.relative_flips(i)).edge_list() == target.edge_list());
      // Presence flags agree with the flip set.
      for (std::size_t k = 0; k < view.changed_pairs().size(); ++k) {
        const auto p = view.changed_pairs()[k];
        CHECK(view.present(i, k) == target.has_edge(p.r, p.c));
      }
    }
  }
}

TEST_CASE("adaptive resample uses the parameter of the new state") {
  const auto g0 = random_graph(30, 0.1, 3, 2, 7);
  NodePair added{0, 1};
  while (g0.has_edge(added.r, added.c)) ++added.c;
  const std::size_t m = 10000;
  const double p_minus = 0.4;
  const auto cache = smoothing_sample(g0, 0.001, p_minus, m, 3);
  Rng rng(4);
  std::vector<NodePair> changed{added};
  const auto view = adaptive_resample(cache, g0, changed, rng);
  double off = 0.0;
  for (std::size_t i = 0; i < m; ++i) off += view.present(i, 0) ? 0.0 : 1.0;
  const double rate = off / static_cast<double>(m);
  CHECK(std::abs(rate - p_minus) <= 3.0 * std::sqrt(p_minus * (1.0 - p_minus) / static_cast<double>(m)));

  // A removed edge becomes a non-edge and turns on with p_plus.
  const auto e = g0.edge_list().front();
  std::vector<NodePair> removed{e};
  const auto cache2 = smoothing_sample(g0, 0.3, p_minus, m, 5);
  const auto view2 = adaptive_resample(cache2, g0, removed, rng);
  double on = 0.0;
  for (std::size_t i = 0; i < m; ++i) on += view2.present(i, 0) ? 1.0 : 0.0;
  CHECK(std::abs(on / static_cast<double>(m) - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / static_cast<double>(m)));
}

TEST_CASE("smooth probabilities match a naive loop") {
  const auto g = random_graph(6, 0.4, 3, 2, 8);
  const auto w = random_weights(ModelKind::gcn, 3, 2, 9);
  std::vector<NodeId> nodes{0, 1, 2, 3, 4, 5};
  const auto vote = clean_predictions(w, g, nodes);
  const auto cache = smoothing_sample(g, 0.2, 0.4, 500, 10);
  const auto expect = naive_probs(w, g, cache.flips, nodes, vote);
  CHECK(smooth_probs(w, g, cache, nodes, vote) == expect);
  CHECK(smooth_probs(w, g, cache, nodes, vote, 7) == expect);
  CHECK(SmoothedClassifier(w, g, cache, nodes, vote).probabilities() == expect);
}

TEST_CASE("smooth probabilities: trivial caches") {
  const auto g = random_graph(20, 0.2, 3, 3, 9);
  const auto w = random_weights(ModelKind::gcn, 3, 3, 10);
  std::vector<NodeId> nodes{0, 5, 10, 15};
  const auto vote = clean_predictions(w, g, nodes);
  for (double p : smooth_probs(w, g, smoothing_sample(g, 0.0, 0.0, 5, 1), nodes, vote)) CHECK(p == 1.0);
  for (double p : smooth_probs(w, g, smoothing_sample(g, 0.1, 0.5, 1, 1), nodes, vote)) {
    CHECK((p == 0.0 || p == 1.0));
  }
}

TEST_CASE("smoothed classifier on a resampled view matches recomputation") {
  const std::size_t n = 40;
  const auto g0 = random_graph(n, 0.1, 4, 3, 11);
  const auto w = random_weights(ModelKind::gcn, 4, 3, 12);
  std::vector<NodeId> nodes{1, 7, 13, 22, 39};
  const auto vote = clean_predictions(w, g0, nodes);
  const auto cache = smoothing_sample(g0, 0.02, 0.4, 60, 13);
  const SmoothedClassifier clf(w, g0, cache, nodes, vote);
  std::mt19937_64 pick_rng(14);
  std::uniform_int_distribution<LinearIndex> pick(0, pair_count(n) - 1);
  for (int t = 0; t < 10; ++t) {
    Candidate cand;
    for (int i = 0; i < 4; ++i) cand.genes.push_back(pick(pick_rng));
    Rng rng(200 + t);
    const auto view = adaptive_resample(clf.cache(), g0, apply_perturbation(g0, cand), rng);
    SmoothingCache resampled = cache;
    for (std::size_t i = 0; i < cache.num_samples(); ++i) resampled.flips[i] = view.flip_set(i);
    const auto expect = naive_probs(w, g0, resampled.flips, nodes, vote);
    const auto got = clf.probabilities(view);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]));
  }
}
