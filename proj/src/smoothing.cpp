#include "evagraph/smoothing.hpp"

#include <algorithm>
#include <unordered_set>

namespace evagraph {

std::vector<LinearIndex> smoothing_sample_one(const Graph& g, double p_plus, double p_minus, Rng& rng) {
  const std::size_t n = g.num_nodes();
  std::vector<LinearIndex> out;
  if (p_minus > 0.0) {
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v : g.neighbors(u)) {
        if (u < v && bernoulli(rng, p_minus)) out.push_back(pi_index(u, v, n));
      }
    }
  }
  const LinearIndex total = pair_count(n);
  const LinearIndex non_edges = total - g.num_edges();
  if (p_plus > 0.0 && non_edges > 0) {
    const auto k = std::binomial_distribution<LinearIndex>(non_edges, p_plus)(rng);
    if (k * 2 <= non_edges) {
      std::unordered_set<LinearIndex> chosen;
      chosen.reserve(static_cast<std::size_t>(k) * 2);
      while (chosen.size() < k) {
        const LinearIndex l = uniform_below<LinearIndex>(rng, total);
        const auto p = pi_inverse(l, n);
        if (g.has_edge(p.r, p.c)) continue;
        chosen.insert(l);
      }
      out.insert(out.end(), chosen.begin(), chosen.end());
    } else {
      // Dense regime: enumerate non-edges and take a uniform subset of size k.
      std::vector<LinearIndex> pool;
      pool.reserve(static_cast<std::size_t>(non_edges));
      for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
          if (!g.has_edge(u, v)) pool.push_back(pi_index(u, v, n));
        }
      }
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + uniform_below<std::size_t>(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
      }
      out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

SmoothingCache smoothing_sample(const Graph& g, double p_plus, double p_minus, std::size_t m, std::uint64_t seed) {
  if (!(p_plus >= 0.0 && p_plus <= 1.0) || !(p_minus >= 0.0 && p_minus <= 1.0)) {
    throw ConfigError("smoothing probabilities must lie in [0, 1]");
  }
  if (m < 1) throw ConfigError("smoothing needs at least one sample");
  SmoothingCache cache;
  cache.p_plus = p_plus;
  cache.p_minus = p_minus;
  cache.seed = seed;
  cache.flips.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    Rng rng = make_rng(seed, "smoothing.sample", {i});
    cache.flips[i] = smoothing_sample_one(g, p_plus, p_minus, rng);
  }
  return cache;
}

SmoothingView adaptive_resample(const SmoothingCache& cache, const Graph& g0, std::span<const NodePair> changed,
                                Rng& rng) {
  SmoothingView view;
  view.cache_ = &cache;
  view.n_ = g0.num_nodes();
  view.changed_.assign(changed.begin(), changed.end());
  const std::size_t m = cache.num_samples();
  const std::size_t k = view.changed_.size();
  view.clean_state_.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& p = view.changed_[j];
    if (p.r >= p.c || p.c >= view.n_) throw InvalidIndexError("adaptive_resample: pair out of range");
    view.clean_state_[j] = g0.has_edge(p.r, p.c) ? 1 : 0;
  }
  view.present_.resize(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      // New state is the complement of the clean entry.
      const bool now_edge = view.clean_state_[j] == 0;
      const bool present = now_edge ? !bernoulli(rng, cache.p_minus) : bernoulli(rng, cache.p_plus);
      view.present_[i * k + j] = present ? 1 : 0;
    }
  }
  return view;
}

SmoothingView adaptive_resample(const SmoothingCache& cache, const Graph& g0, const Graph& g1, Rng& rng) {
  const auto changed = symmetric_difference(g0, g1);
  return adaptive_resample(cache, g0, changed, rng);
}

std::vector<NodePair> SmoothingView::relative_flips(std::size_t sample) const {
  const auto& fs = cache_->flips[sample];
  std::vector<NodePair> out;
  for (std::size_t j = 0; j < changed_.size(); ++j) {
    const auto l = pi_index(changed_[j].r, changed_[j].c, n_);
    const bool cached = (clean_state_[j] != 0) != std::binary_search(fs.begin(), fs.end(), l);
    if (cached != present(sample, j)) out.push_back(changed_[j]);
  }
  return out;
}

std::vector<LinearIndex> SmoothingView::flip_set(std::size_t sample) const {
  std::vector<LinearIndex> touched;
  std::vector<LinearIndex> redrawn;
  for (std::size_t j = 0; j < changed_.size(); ++j) {
    const auto l = pi_index(changed_[j].r, changed_[j].c, n_);
    touched.push_back(l);
    if ((clean_state_[j] != 0) != present(sample, j)) redrawn.push_back(l);
  }
  std::sort(touched.begin(), touched.end());
  std::sort(redrawn.begin(), redrawn.end());
  std::vector<LinearIndex> kept;
  const auto& fs = cache_->flips[sample];
  std::set_difference(fs.begin(), fs.end(), touched.begin(), touched.end(), std::back_inserter(kept));
  std::vector<LinearIndex> out;
  std::merge(kept.begin(), kept.end(), redrawn.begin(), redrawn.end(), std::back_inserter(out));
  return out;
}

std::vector<double> smooth_probs(const ModelWeights& w, const Graph& g0, const SmoothingCache& cache,
                                 std::span<const NodeId> nodes, std::span<const std::int64_t> vote_class,
                                 std::size_t max_copies_per_pass) {
  if (cache.num_samples() == 0) throw ConfigError("smooth_probs: empty cache");
  if (vote_class.size() != nodes.size()) throw DimensionError("smooth_probs: vote classes do not match nodes");
  std::vector<std::size_t> votes(nodes.size(), 0);
  const std::size_t m = cache.num_samples();
  for (std::size_t start = 0; start < m; start += max_copies_per_pass) {
    const std::size_t k = std::min(max_copies_per_pass, m - start);
    std::vector<Candidate> batch;
    batch.reserve(k);
    for (std::size_t i = 0; i < k; ++i) batch.push_back(cache.sample_candidate(start + i));
    const auto logits = stacked_forward(w, g0, batch, nodes, max_copies_per_pass);
    for (const auto& lg : logits) {
      for (std::size_t t = 0; t < nodes.size(); ++t) {
        votes[t] += argmax_row(lg, static_cast<Eigen::Index>(t)) == vote_class[t] ? 1 : 0;
      }
    }
  }
  std::vector<double> out(nodes.size());
  for (std::size_t t = 0; t < nodes.size(); ++t) out[t] = static_cast<double>(votes[t]) / static_cast<double>(m);
  return out;
}

SmoothedClassifier::SmoothedClassifier(const ModelWeights& w, const Graph& g0, SmoothingCache cache,
                                       std::vector<NodeId> nodes, std::vector<std::int64_t> vote_class)
    : g0_(g0), cache_(std::move(cache)), nodes_(std::move(nodes)), vote_class_(std::move(vote_class)) {
  if (cache_.num_samples() == 0) throw ConfigError("smoothed classifier: empty cache");
  if (vote_class_.size() != nodes_.size()) throw DimensionError("smoothed classifier: vote classes do not match nodes");
  const auto z = IncrementalEvaluator::feature_transform(w, g0_);
  samples_.reserve(cache_.num_samples());
  for (std::size_t i = 0; i < cache_.num_samples(); ++i) {
    samples_.emplace_back(w, apply_perturbation(g0_, cache_.sample_candidate(i)), nodes_, z);
  }
}

std::vector<double> SmoothedClassifier::probabilities() const {
  std::vector<std::size_t> votes(nodes_.size(), 0);
  for (const auto& ev : samples_) {
    const auto& lg = ev.clean_logits();
    for (std::size_t t = 0; t < nodes_.size(); ++t) {
      votes[t] += argmax_row(lg, static_cast<Eigen::Index>(t)) == vote_class_[t] ? 1 : 0;
    }
  }
  std::vector<double> out(nodes_.size());
  const auto m = static_cast<double>(samples_.size());
  for (std::size_t t = 0; t < nodes_.size(); ++t) out[t] = static_cast<double>(votes[t]) / m;
  return out;
}

std::vector<double> SmoothedClassifier::probabilities(const SmoothingView& view) const {
  if (&view.cache() != &cache_) throw ConfigError("smoothed classifier: view belongs to another cache");
  std::vector<std::size_t> votes(nodes_.size(), 0);
  Matrix lg;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto flips = view.relative_flips(i);
    samples_[i].logits_into(flips, lg);
    for (std::size_t t = 0; t < nodes_.size(); ++t) {
      votes[t] += argmax_row(lg, static_cast<Eigen::Index>(t)) == vote_class_[t] ? 1 : 0;
    }
  }
  std::vector<double> out(nodes_.size());
  const auto m = static_cast<double>(samples_.size());
  for (std::size_t t = 0; t < nodes_.size(); ++t) out[t] = static_cast<double>(votes[t]) / m;
  return out;
}

}  // namespace evagraph
