#include "evagraph/incremental.hpp"

#include <algorithm>
#include <cmath>

namespace evagraph {

namespace {

// Per-thread node-indexed scratch. Entries are restored to -1 after every call.
struct Scratch {
  std::vector<std::int32_t> endpoint_slot;
  std::vector<std::int32_t> changed_slot;
  std::vector<std::int32_t> target_slot;

  void ensure(std::size_t n) {
    if (endpoint_slot.size() < n) {
      endpoint_slot.assign(n, -1);
      changed_slot.assign(n, -1);
      target_slot.assign(n, -1);
    }
  }
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

std::shared_ptr<const Matrix> IncrementalEvaluator::feature_transform(const ModelWeights& w, const Graph& g) {
  if (g.features().cols() != w.W0.rows()) throw DimensionError("model weights do not match feature dimension");
  return std::make_shared<const Matrix>(g.features() * w.W0);
}

IncrementalEvaluator::IncrementalEvaluator(const ModelWeights& w, Graph base, std::span<const NodeId> requested)
    : IncrementalEvaluator(w, base, requested, feature_transform(w, base)) {}

IncrementalEvaluator::IncrementalEvaluator(const ModelWeights& w, Graph base, std::span<const NodeId> requested,
                                           std::shared_ptr<const Matrix> feature_transform)
    : w_(w), base_(std::move(base)), requested_(requested.begin(), requested.end()), z_(std::move(feature_transform)) {
  const std::size_t n = base_.num_nodes();
  requested_pos_.assign(n, -1);
  for (std::size_t i = 0; i < requested_.size(); ++i) {
    if (requested_[i] >= n) throw DimensionError("incremental evaluator: requested node out of range");
    requested_pos_[requested_[i]] = static_cast<std::int32_t>(i);
  }
  if (z_->rows() != static_cast<Eigen::Index>(n) || z_->cols() != w_.W0.cols()) {
    throw DimensionError("incremental evaluator: feature transform has the wrong shape");
  }
  Matrix logits;
  if (w_.kind == ModelKind::gcn) {
    const auto adj = gcn_normalize(base_);
    dinv_ = inverse_sqrt_degrees(base_);
    Matrix pre = adj.multiply(*z_);
    pre.rowwise() += w_.b0;
    g_ = pre.cwiseMax(0.0f) * w_.W1;
    logits = adj.multiply(g_);
  } else {
    Matrix pre = *z_;
    pre.rowwise() += w_.b0;
    logits = pre.cwiseMax(0.0f) * w_.W1;
  }
  logits.rowwise() += w_.b1;
  clean_.resize(static_cast<Eigen::Index>(requested_.size()), logits.cols());
  for (std::size_t i = 0; i < requested_.size(); ++i) {
    clean_.row(static_cast<Eigen::Index>(i)) = logits.row(requested_[i]);
  }
}

Matrix IncrementalEvaluator::logits(std::span<const NodePair> distinct_flips) const {
  Matrix out;
  logits_into(distinct_flips, out);
  return out;
}

Matrix IncrementalEvaluator::logits(const Candidate& cand) const {
  const auto flips = decode_flips(cand, base_.num_nodes());
  return logits(flips);
}

void IncrementalEvaluator::logits_into(std::span<const NodePair> distinct_flips, Matrix& out) const {
  out = clean_;
  if (w_.kind == ModelKind::mlp || distinct_flips.empty()) return;

  const std::size_t n = base_.num_nodes();
  const Eigen::Index h = z_->cols();
  const Eigen::Index classes = g_.cols();
  Scratch& sc = scratch();
  sc.ensure(n);

  // Toggled partners per endpoint, sorted.
  std::vector<std::pair<NodeId, NodeId>> toggles;
  toggles.reserve(distinct_flips.size() * 2);
  for (const auto& f : distinct_flips) {
    if (f.r >= f.c || f.c >= n) throw InvalidIndexError("flip pair out of range");
    toggles.emplace_back(f.r, f.c);
    toggles.emplace_back(f.c, f.r);
  }
  std::sort(toggles.begin(), toggles.end());

  struct Endpoint {
    NodeId node;
    std::size_t begin, end;
    float dinv;
  };
  std::vector<Endpoint> endpoints;
  for (std::size_t i = 0; i < toggles.size();) {
    const NodeId u = toggles[i].first;
    std::size_t j = i;
    std::int64_t deg = base_.degree(u);
    while (j < toggles.size() && toggles[j].first == u) {
      deg += base_.has_edge(u, toggles[j].second) ? -1 : 1;
      ++j;
    }
    sc.endpoint_slot[u] = static_cast<std::int32_t>(endpoints.size());
    endpoints.push_back({u, i, j, 1.0f / std::sqrt(static_cast<float>(deg + 1))});
    i = j;
  }

  auto dinv_new = [&](NodeId v) {
    const auto s = sc.endpoint_slot[v];
    return s >= 0 ? endpoints[static_cast<std::size_t>(s)].dinv : dinv_[v];
  };

  // Visits N'(u) + {u} in ascending order, matching the normalized CSR layout.
  auto visit_row = [&](NodeId u, auto&& fn) {
    auto nb = base_.neighbors(u);
    const auto s = sc.endpoint_slot[u];
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t j_end = 0;
    if (s >= 0) {
      j = endpoints[static_cast<std::size_t>(s)].begin;
      j_end = endpoints[static_cast<std::size_t>(s)].end;
    }
    bool self_done = false;
    auto emit = [&](NodeId v) {
      if (!self_done && v > u) {
        fn(u);
        self_done = true;
      }
      fn(v);
    };
    while (i < nb.size() || j < j_end) {
      if (j == j_end || (i < nb.size() && nb[i] < toggles[j].second)) {
        emit(nb[i++]);
      } else if (i == nb.size() || toggles[j].second < nb[i]) {
        emit(toggles[j++].second);
      } else {
        ++i;
        ++j;
      }
    }
    if (!self_done) fn(u);
  };

  // Nodes whose normalized row changes: endpoints and their new neighbors.
  std::vector<NodeId> changed;
  auto mark_changed = [&](NodeId v) {
    if (sc.changed_slot[v] < 0) {
      sc.changed_slot[v] = static_cast<std::int32_t>(changed.size());
      changed.push_back(v);
    }
  };
  for (const auto& e : endpoints) visit_row(e.node, mark_changed);

  // Requested nodes within one hop of a changed row.
  std::vector<NodeId> targets;
  auto mark_target = [&](NodeId v) {
    if (requested_pos_[v] >= 0 && sc.target_slot[v] < 0) {
      sc.target_slot[v] = 1;
      targets.push_back(v);
    }
  };
  for (std::size_t k = 0; k < changed.size(); ++k) visit_row(changed[k], mark_target);

  Matrix g_changed(static_cast<Eigen::Index>(changed.size()), classes);
  std::vector<std::uint8_t> computed(changed.size(), 0);
  std::vector<float> hidden(static_cast<std::size_t>(h));
  auto g_row = [&](NodeId v) -> const float* {
    const auto s = sc.changed_slot[v];
    if (s < 0) return g_.data() + static_cast<Eigen::Index>(v) * classes;
    float* dst = g_changed.data() + static_cast<Eigen::Index>(s) * classes;
    if (!computed[static_cast<std::size_t>(s)]) {
      std::fill(hidden.begin(), hidden.end(), 0.0f);
      const float dv = dinv_new(v);
      visit_row(v, [&](NodeId x) {
        const float val = dv * dinv_new(x);
        const float* src = z_->data() + static_cast<Eigen::Index>(x) * h;
        for (Eigen::Index j = 0; j < h; ++j) hidden[static_cast<std::size_t>(j)] += val * src[j];
      });
      for (Eigen::Index j = 0; j < h; ++j) {
        hidden[static_cast<std::size_t>(j)] = std::max(hidden[static_cast<std::size_t>(j)] + w_.b0[j], 0.0f);
      }
      for (Eigen::Index c = 0; c < classes; ++c) dst[c] = 0.0f;
      for (Eigen::Index j = 0; j < h; ++j) {
        const float hj = hidden[static_cast<std::size_t>(j)];
        if (hj == 0.0f) continue;
        const float* wrow = w_.W1.data() + j * classes;
        for (Eigen::Index c = 0; c < classes; ++c) dst[c] += hj * wrow[c];
      }
      computed[static_cast<std::size_t>(s)] = 1;
    }
    return dst;
  };

  std::vector<float> acc(static_cast<std::size_t>(classes));
  for (NodeId t : targets) {
    std::fill(acc.begin(), acc.end(), 0.0f);
    const float dt = dinv_new(t);
    visit_row(t, [&](NodeId v) {
      const float val = dt * dinv_new(v);
      const float* src = g_row(v);
      for (Eigen::Index c = 0; c < classes; ++c) acc[static_cast<std::size_t>(c)] += val * src[c];
    });
    const auto row = static_cast<Eigen::Index>(requested_pos_[t]);
    for (Eigen::Index c = 0; c < classes; ++c) out(row, c) = acc[static_cast<std::size_t>(c)] + w_.b1[c];
  }

  for (const auto& e : endpoints) sc.endpoint_slot[e.node] = -1;
  for (NodeId v : changed) sc.changed_slot[v] = -1;
  for (NodeId v : targets) sc.target_slot[v] = -1;
}

}  // namespace evagraph
