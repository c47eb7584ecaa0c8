#include "evagraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace evagraph {

namespace {

std::int64_t row_start(std::int64_t r, std::int64_t n) { return r * n - r * (r + 1) / 2; }

void check_index(LinearIndex l, std::uint64_t n) {
  if (l >= pair_count(n)) {
    throw InvalidIndexError("linear index " + std::to_string(l) + " out of range for n=" + std::to_string(n));
  }
}

}  // namespace

const std::vector<std::uint8_t>& SplitMasks::get(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
    case Split::unlabeled: return unlabeled;
  }
  return unlabeled;
}

LinearIndex pi_index(NodeId r, NodeId c, std::uint64_t n) {
  if (r >= c || c >= n) {
    throw InvalidPairError("invalid pair (" + std::to_string(r) + ", " + std::to_string(c) +
                           ") for n=" + std::to_string(n));
  }
  const auto rr = static_cast<std::uint64_t>(r);
  return rr * n - rr * (rr + 1) / 2 + (c - r - 1);
}

NodePair pi_inverse_closed_form(LinearIndex l, std::uint64_t n) {
  check_index(l, n);
  const auto nn = static_cast<std::int64_t>(n);
  const auto ll = static_cast<std::int64_t>(l);
  const double disc = static_cast<double>(-8 * ll + 4 * nn * (nn - 1) - 7);
  const auto r = nn - 2 - static_cast<std::int64_t>(std::floor(std::sqrt(disc) / 2.0 - 0.5));
  const auto c = 1 + ll + r - nn * (nn - 1) / 2 + ((nn - r) * (nn - r - 1)) / 2;
  return {static_cast<NodeId>(r), static_cast<NodeId>(c)};
}

NodePair pi_inverse(LinearIndex l, std::uint64_t n) {
  check_index(l, n);
  const auto nn = static_cast<std::int64_t>(n);
  const auto ll = static_cast<std::int64_t>(l);
  const double disc = static_cast<double>(-8 * ll + 4 * nn * (nn - 1) - 7);
  auto r = nn - 2 - static_cast<std::int64_t>(std::floor(std::sqrt(disc) / 2.0 - 0.5));
  r = std::clamp<std::int64_t>(r, 0, nn - 2);
  while (r > 0 && row_start(r, nn) > ll) --r;
  while (r + 1 <= nn - 2 && row_start(r + 1, nn) <= ll) ++r;
  const auto c = ll - row_start(r, nn) + r + 1;
  return {static_cast<NodeId>(r), static_cast<NodeId>(c)};
}

Graph Graph::from_edges(std::size_t n, std::span<const NodePair> edges, std::shared_ptr<const Matrix> features,
                        std::vector<std::int64_t> labels, SplitMasks masks) {
  std::vector<std::pair<NodeId, NodeId>> dir;
  dir.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    if (e.r >= n || e.c >= n) throw InvalidPairError("edge endpoint out of range");
    if (e.r == e.c) continue;
    dir.emplace_back(e.r, e.c);
    dir.emplace_back(e.c, e.r);
  }
  std::sort(dir.begin(), dir.end());
  dir.erase(std::unique(dir.begin(), dir.end()), dir.end());
  std::vector<std::uint32_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> cols;
  cols.reserve(dir.size());
  for (const auto& [u, v] : dir) {
    ++offsets[u + 1];
    cols.push_back(v);
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  return from_csr(std::move(offsets), std::move(cols), std::move(features), std::move(labels), std::move(masks));
}

Graph Graph::from_csr(std::vector<std::uint32_t> row_offsets, std::vector<std::uint32_t> col_indices,
                      std::shared_ptr<const Matrix> features, std::vector<std::int64_t> labels, SplitMasks masks) {
  Graph g;
  g.row_offsets_ = std::move(row_offsets);
  g.col_indices_ = std::move(col_indices);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.masks_ = std::move(masks);
  std::int64_t max_label = -1;
  for (auto y : g.labels_) max_label = std::max(max_label, y);
  g.num_classes_ = static_cast<std::size_t>(max_label + 1);
  g.validate();
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<NodeId> Graph::nodes_in(Split s) const {
  const auto& mask = masks_.get(s);
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (mask[v]) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

std::vector<NodePair> Graph::edge_list() const {
  std::vector<NodePair> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.push_back({u, v});
    }
  }
  return out;
}

Graph Graph::with_adjacency(std::vector<std::uint32_t> row_offsets, std::vector<std::uint32_t> col_indices) const {
  Graph g;
  g.row_offsets_ = std::move(row_offsets);
  g.col_indices_ = std::move(col_indices);
  g.features_ = features_;
  g.labels_ = labels_;
  g.masks_ = masks_;
  g.num_classes_ = num_classes_;
  return g;
}

void Graph::validate() const {
  if (row_offsets_.empty()) throw Error("graph: empty row_offsets");
  const std::size_t n = num_nodes();
  if (row_offsets_.front() != 0 || row_offsets_.back() != col_indices_.size()) {
    throw Error("graph: row_offsets do not span col_indices");
  }
  for (std::size_t u = 0; u < n; ++u) {
    if (row_offsets_[u] > row_offsets_[u + 1]) throw Error("graph: row_offsets not monotone");
    auto nb = neighbors(static_cast<NodeId>(u));
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const NodeId v = nb[i];
      if (v >= n) throw Error("graph: column index out of range at row " + std::to_string(u));
      if (v == u) throw Error("graph: self-loop at node " + std::to_string(u));
      if (i > 0 && nb[i - 1] >= v) throw Error("graph: unsorted or duplicate neighbor at row " + std::to_string(u));
      if (!has_edge(v, static_cast<NodeId>(u))) {
        throw Error("graph: asymmetric pair (" + std::to_string(u) + ", " + std::to_string(v) + ")");
      }
    }
  }
  if (features_ && static_cast<std::size_t>(features_->rows()) != n) throw Error("graph: feature rows != n");
  if (labels_.size() != n) throw Error("graph: labels length != n");
  for (auto y : labels_) {
    if (y < 0) throw Error("graph: negative label");
  }
  const std::vector<std::uint8_t>* all[] = {&masks_.train, &masks_.val, &masks_.test, &masks_.unlabeled};
  for (const auto* m : all) {
    if (m->size() != n) throw Error("graph: mask length != n");
  }
  for (std::size_t v = 0; v < n; ++v) {
    int count = 0;
    for (const auto* m : all) count += (*m)[v] ? 1 : 0;
    if (count != 1) throw Error("graph: masks not a partition at node " + std::to_string(v));
  }
}

Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  const std::size_t n = g.num_nodes();
  std::vector<std::int64_t> remap(n, -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) remap[nodes[i]] = static_cast<std::int64_t>(i);
  std::vector<std::uint32_t> offsets(nodes.size() + 1, 0);
  std::vector<std::uint32_t> cols;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId v : g.neighbors(nodes[i])) {
      if (remap[v] >= 0) cols.push_back(static_cast<std::uint32_t>(remap[v]));
    }
    std::sort(cols.begin() + offsets[i], cols.end());
    offsets[i + 1] = static_cast<std::uint32_t>(cols.size());
  }
  auto features = std::make_shared<Matrix>(static_cast<Eigen::Index>(nodes.size()), g.features().cols());
  std::vector<std::int64_t> labels(nodes.size());
  SplitMasks masks;
  masks.train.resize(nodes.size());
  masks.val.resize(nodes.size());
  masks.test.resize(nodes.size());
  masks.unlabeled.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId v = nodes[i];
    features->row(static_cast<Eigen::Index>(i)) = g.features().row(v);
    labels[i] = g.labels()[v];
    masks.train[i] = g.masks().train[v];
    masks.val[i] = g.masks().val[v];
    masks.test[i] = g.masks().test[v];
    masks.unlabeled[i] = g.masks().unlabeled[v];
  }
  return Graph::from_csr(std::move(offsets), std::move(cols), std::move(features), std::move(labels),
                         std::move(masks));
}

std::vector<LinearIndex> distinct_genes(const Candidate& cand) {
  std::vector<LinearIndex> genes = cand.genes;
  std::sort(genes.begin(), genes.end());
  genes.erase(std::unique(genes.begin(), genes.end()), genes.end());
  return genes;
}

std::vector<NodePair> decode_flips(const Candidate& cand, std::size_t n) {
  auto genes = distinct_genes(cand);
  std::vector<NodePair> flips;
  flips.reserve(genes.size());
  for (auto l : genes) flips.push_back(pi_inverse(l, n));
  return flips;
}

Graph apply_flips(const Graph& g, std::span<const NodePair> distinct_flips) {
  const std::size_t n = g.num_nodes();
  std::vector<std::pair<NodeId, NodeId>> toggles;
  toggles.reserve(distinct_flips.size() * 2);
  for (const auto& f : distinct_flips) {
    if (f.r >= f.c || f.c >= n) throw InvalidIndexError("flip pair out of range");
    toggles.emplace_back(f.r, f.c);
    toggles.emplace_back(f.c, f.r);
  }
  std::sort(toggles.begin(), toggles.end());
  toggles.erase(std::unique(toggles.begin(), toggles.end()), toggles.end());

  std::vector<std::uint32_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> cols;
  cols.reserve(g.col_indices().size() + toggles.size());
  std::size_t t = 0;
  for (NodeId u = 0; u < n; ++u) {
    auto nb = g.neighbors(u);
    std::size_t t_end = t;
    while (t_end < toggles.size() && toggles[t_end].first == u) ++t_end;
    // Sorted symmetric difference of the row with its toggles.
    std::size_t i = 0;
    std::size_t j = t;
    while (i < nb.size() || j < t_end) {
      if (j == t_end || (i < nb.size() && nb[i] < toggles[j].second)) {
        cols.push_back(nb[i++]);
      } else if (i == nb.size() || toggles[j].second < nb[i]) {
        cols.push_back(toggles[j++].second);
      } else {
        ++i;
        ++j;
      }
    }
    t = t_end;
    offsets[u + 1] = static_cast<std::uint32_t>(cols.size());
  }
  return g.with_adjacency(std::move(offsets), std::move(cols));
}

Graph apply_perturbation(const Graph& g, const Candidate& cand) {
  auto flips = decode_flips(cand, g.num_nodes());
  return apply_flips(g, flips);
}

std::vector<NodePair> symmetric_difference(const Graph& g0, const Graph& g1) {
  if (g0.num_nodes() != g1.num_nodes()) throw DimensionError("symmetric_difference: node counts differ");
  std::vector<NodePair> out;
  for (NodeId u = 0; u < g0.num_nodes(); ++u) {
    auto a = g0.neighbors(u);
    auto b = g1.neighbors(u);
    std::vector<NodeId> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    for (NodeId v : diff) {
      if (u < v) out.push_back({u, v});
    }
  }
  return out;
}

std::uint32_t local_allowance(std::uint32_t deg0, double e_loc) {
  return static_cast<std::uint32_t>(std::floor(e_loc * static_cast<double>(deg0) + 1e-9));
}

LocalViolations count_local_violations(const Graph& g0, const Graph& g1, double e_loc) {
  if (g0.num_nodes() != g1.num_nodes()) throw DimensionError("count_local_violations: node counts differ");
  LocalViolations out;
  out.per_node.assign(g0.num_nodes(), 0);
  for (NodeId v = 0; v < g0.num_nodes(); ++v) {
    const std::int64_t d0 = g0.degree(v);
    const std::int64_t d1 = g1.degree(v);
    const std::int64_t excess = d1 - d0 - static_cast<std::int64_t>(local_allowance(g0.degree(v), e_loc));
    if (excess > 0) {
      out.per_node[v] = static_cast<std::uint32_t>(excess);
      out.total += static_cast<std::uint64_t>(excess);
    }
  }
  return out;
}

std::uint64_t incident_edge_count(const Graph& g, std::span<const NodeId> v_att) {
  std::vector<std::uint8_t> in(g.num_nodes(), 0);
  for (NodeId v : v_att) in[v] = 1;
  std::uint64_t count = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v : g.neighbors(u)) {
      if (u < v && (in[u] || in[v])) ++count;
    }
  }
  return count;
}

std::uint64_t budget_for(double epsilon, std::uint64_t incident_edges) {
  // The small slack absorbs products like 0.29 * 100 landing just below an integer.
  return static_cast<std::uint64_t>(std::floor(epsilon * static_cast<double>(incident_edges) + 1e-9));
}

namespace {

std::vector<NodeId> normalized_nodes(const Graph& g, std::vector<NodeId> v_att) {
  std::sort(v_att.begin(), v_att.end());
  v_att.erase(std::unique(v_att.begin(), v_att.end()), v_att.end());
  if (v_att.empty()) throw ConfigError("attack scope: v_att is empty");
  if (v_att.back() >= g.num_nodes()) throw ConfigError("attack scope: node id out of range");
  return v_att;
}

}  // namespace

AttackScope AttackScope::make(const Graph& g, std::vector<NodeId> v_att, double epsilon, std::optional<double> e_loc) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("attack scope: epsilon must lie in (0, 1]");
  if (e_loc && *e_loc < 0.0) throw ConfigError("attack scope: e_loc must be >= 0");
  AttackScope s;
  s.v_att = normalized_nodes(g, std::move(v_att));
  s.epsilon = epsilon;
  s.e_loc = e_loc;
  s.delta = budget_for(epsilon, incident_edge_count(g, s.v_att));
  return s;
}

AttackScope AttackScope::with_budget(const Graph& g, std::vector<NodeId> v_att, std::uint64_t delta,
                                     std::optional<double> e_loc) {
  if (e_loc && *e_loc < 0.0) throw ConfigError("attack scope: e_loc must be >= 0");
  AttackScope s;
  s.v_att = normalized_nodes(g, std::move(v_att));
  s.e_loc = e_loc;
  s.delta = delta;
  const auto incident = incident_edge_count(g, s.v_att);
  s.epsilon = incident > 0 ? static_cast<double>(delta) / static_cast<double>(incident) : 0.0;
  return s;
}

}  // namespace evagraph
