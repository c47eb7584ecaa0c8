#include "evagraph/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "evagraph/grph_io.hpp"

namespace evagraph {

std::string to_string(ModelKind k) { return k == ModelKind::gcn ? "gcn" : "mlp"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "gcn" || s == "GCN") return ModelKind::gcn;
  if (s == "mlp" || s == "MLP") return ModelKind::mlp;
  throw ConfigError("unknown model kind '" + s + "' (expected gcn or mlp)");
}

ModelWeights init_weights(ModelKind kind, Eigen::Index in_dim, Eigen::Index classes, Rng& rng, Eigen::Index hidden) {
  auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const float limit = std::sqrt(6.0f / static_cast<float>(rows + cols));
    std::uniform_real_distribution<float> dist(-limit, limit);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
  };
  ModelWeights w;
  w.kind = kind;
  w.W0 = glorot(in_dim, hidden);
  w.b0 = RowVector::Zero(hidden);
  w.W1 = glorot(hidden, classes);
  w.b1 = RowVector::Zero(classes);
  return w;
}

float NormalizedAdjacency::at(NodeId r, NodeId c) const {
  const auto* begin = col_indices.data() + row_offsets[r];
  const auto* end = col_indices.data() + row_offsets[r + 1];
  const auto* it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0f;
  return values[static_cast<std::size_t>(it - col_indices.data())];
}

template <typename S>
MatrixT<S> NormalizedAdjacency::multiply(const MatrixT<S>& dense) const {
  const auto n = static_cast<Eigen::Index>(rows());
  const Eigen::Index h = dense.cols();
  MatrixT<S> out = MatrixT<S>::Zero(n, h);
  for (Eigen::Index u = 0; u < n; ++u) {
    S* dst = out.data() + u * h;
    for (auto k = row_offsets[u]; k < row_offsets[u + 1]; ++k) {
      const S val = static_cast<S>(values[k]);
      const S* src = dense.data() + static_cast<Eigen::Index>(col_indices[k]) * h;
      for (Eigen::Index j = 0; j < h; ++j) dst[j] += val * src[j];
    }
  }
  return out;
}

template MatrixT<float> NormalizedAdjacency::multiply<float>(const MatrixT<float>&) const;
template MatrixT<double> NormalizedAdjacency::multiply<double>(const MatrixT<double>&) const;

std::vector<float> inverse_sqrt_degrees(const Graph& g) {
  std::vector<float> dinv(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    dinv[v] = 1.0f / std::sqrt(static_cast<float>(g.degree(v) + 1));
  }
  return dinv;
}

NormalizedAdjacency gcn_normalize(const Graph& g) {
  const std::size_t n = g.num_nodes();
  const auto dinv = inverse_sqrt_degrees(g);
  NormalizedAdjacency a;
  a.row_offsets.assign(n + 1, 0);
  a.col_indices.reserve(g.col_indices().size() + n);
  a.values.reserve(g.col_indices().size() + n);
  for (NodeId u = 0; u < n; ++u) {
    bool self_done = false;
    for (NodeId v : g.neighbors(u)) {
      if (!self_done && v > u) {
        a.col_indices.push_back(u);
        a.values.push_back(dinv[u] * dinv[u]);
        self_done = true;
      }
      a.col_indices.push_back(v);
      a.values.push_back(dinv[u] * dinv[v]);
    }
    if (!self_done) {
      a.col_indices.push_back(u);
      a.values.push_back(dinv[u] * dinv[u]);
    }
    a.row_offsets[u + 1] = static_cast<std::uint32_t>(a.col_indices.size());
  }
  return a;
}

namespace {

template <typename S>
void check_shapes(const WeightsT<S>& w, const MatrixT<S>& features) {
  if (features.cols() != w.W0.rows() || w.b0.size() != w.W0.cols() || w.W1.rows() != w.W0.cols() ||
      w.b1.size() != w.W1.cols()) {
    throw DimensionError("model weights do not match feature dimension " + std::to_string(features.cols()));
  }
}

template <typename S>
struct ForwardCache {
  MatrixT<S> pre;     // hidden pre-activation
  MatrixT<S> hidden;  // after relu and dropout
  MatrixT<S> logits;
};

template <typename S>
ForwardCache<S> forward_cached(const WeightsT<S>& w, const NormalizedAdjacency* adj, const MatrixT<S>& features,
                               const MatrixT<S>* dropout_scale) {
  check_shapes(w, features);
  ForwardCache<S> fc;
  MatrixT<S> z = features * w.W0;
  fc.pre = adj ? adj->multiply(z) : std::move(z);
  fc.pre.rowwise() += w.b0;
  fc.hidden = fc.pre.cwiseMax(S(0));
  if (dropout_scale) fc.hidden = fc.hidden.cwiseProduct(*dropout_scale);
  MatrixT<S> g = fc.hidden * w.W1;
  fc.logits = adj ? adj->multiply(g) : std::move(g);
  fc.logits.rowwise() += w.b1;
  return fc;
}

template <typename S>
S row_logsumexp(const MatrixT<S>& m, Eigen::Index row) {
  const S mx = m.row(row).maxCoeff();
  return mx + std::log((m.row(row).array() - mx).exp().sum());
}

template <typename S>
void check_nodes(std::span<const std::int64_t> labels, std::span<const NodeId> nodes, Eigen::Index n,
                 Eigen::Index classes) {
  if (nodes.empty()) throw ConfigError("loss over an empty node set");
  for (NodeId v : nodes) {
    if (static_cast<Eigen::Index>(v) >= n) throw DimensionError("loss node out of range");
    if (labels[v] < 0 || labels[v] >= classes) throw DimensionError("label out of range for model");
  }
}

}  // namespace

template <typename S>
MatrixT<S> forward_with(const WeightsT<S>& w, const NormalizedAdjacency* adj, const MatrixT<S>& features,
                        const MatrixT<S>* dropout_scale) {
  return forward_cached(w, w.kind == ModelKind::gcn ? adj : nullptr, features, dropout_scale).logits;
}

template MatrixT<float> forward_with<float>(const WeightsT<float>&, const NormalizedAdjacency*, const MatrixT<float>&,
                                            const MatrixT<float>*);
template MatrixT<double> forward_with<double>(const WeightsT<double>&, const NormalizedAdjacency*,
                                              const MatrixT<double>&, const MatrixT<double>*);

template <typename S>
S cross_entropy_loss(const WeightsT<S>& w, const NormalizedAdjacency* adj, const MatrixT<S>& features,
                     std::span<const std::int64_t> labels, std::span<const NodeId> nodes,
                     const MatrixT<S>* dropout_scale) {
  const MatrixT<S> logits = forward_with(w, adj, features, dropout_scale);
  check_nodes<S>(labels, nodes, logits.rows(), logits.cols());
  S total = 0;
  for (NodeId v : nodes) total += row_logsumexp(logits, v) - logits(v, labels[v]);
  return total / static_cast<S>(nodes.size());
}

template float cross_entropy_loss<float>(const WeightsT<float>&, const NormalizedAdjacency*, const MatrixT<float>&,
                                         std::span<const std::int64_t>, std::span<const NodeId>,
                                         const MatrixT<float>*);
template double cross_entropy_loss<double>(const WeightsT<double>&, const NormalizedAdjacency*,
                                           const MatrixT<double>&, std::span<const std::int64_t>,
                                           std::span<const NodeId>, const MatrixT<double>*);

template <typename S>
LossAndGradient<S> loss_and_gradient(const WeightsT<S>& w, const NormalizedAdjacency* adj,
                                     const MatrixT<S>& features, std::span<const std::int64_t> labels,
                                     std::span<const NodeId> nodes, const MatrixT<S>* dropout_scale) {
  const NormalizedAdjacency* a = w.kind == ModelKind::gcn ? adj : nullptr;
  auto fc = forward_cached(w, a, features, dropout_scale);
  const Eigen::Index n = fc.logits.rows();
  const Eigen::Index classes = fc.logits.cols();
  check_nodes<S>(labels, nodes, n, classes);

  LossAndGradient<S> out;
  const S inv_count = S(1) / static_cast<S>(nodes.size());
  MatrixT<S> d_logits = MatrixT<S>::Zero(n, classes);
  for (NodeId v : nodes) {
    const S lse = row_logsumexp(fc.logits, v);
    out.loss += lse - fc.logits(v, labels[v]);
    d_logits.row(v) = (fc.logits.row(v).array() - lse).exp().matrix() * inv_count;
    d_logits(v, labels[v]) -= inv_count;
  }
  out.loss *= inv_count;

  out.grad.kind = w.kind;
  out.grad.b1 = d_logits.colwise().sum();
  const MatrixT<S> d_g = a ? a->multiply(d_logits) : d_logits;
  out.grad.W1.noalias() = fc.hidden.transpose() * d_g;
  MatrixT<S> d_hidden = d_g * w.W1.transpose();
  if (dropout_scale) d_hidden = d_hidden.cwiseProduct(*dropout_scale);
  const MatrixT<S> d_pre = (fc.pre.array() > S(0)).select(d_hidden, S(0));
  out.grad.b0 = d_pre.colwise().sum();
  const MatrixT<S> d_z = a ? a->multiply(d_pre) : d_pre;
  out.grad.W0.noalias() = features.transpose() * d_z;
  return out;
}

template LossAndGradient<float> loss_and_gradient<float>(const WeightsT<float>&, const NormalizedAdjacency*,
                                                         const MatrixT<float>&, std::span<const std::int64_t>,
                                                         std::span<const NodeId>, const MatrixT<float>*);
template LossAndGradient<double> loss_and_gradient<double>(const WeightsT<double>&, const NormalizedAdjacency*,
                                                           const MatrixT<double>&, std::span<const std::int64_t>,
                                                           std::span<const NodeId>, const MatrixT<double>*);

Matrix forward(const ModelWeights& w, const Graph& g, std::optional<Dropout> dropout) {
  Matrix scale;
  const Matrix* scale_ptr = nullptr;
  if (dropout && dropout->rng && dropout->rate > 0.0) {
    scale.resize(static_cast<Eigen::Index>(g.num_nodes()), w.hidden_dim());
    const auto keep = static_cast<float>(1.0 / (1.0 - dropout->rate));
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
      scale.data()[i] = bernoulli(*dropout->rng, dropout->rate) ? 0.0f : keep;
    }
    scale_ptr = &scale;
  }
  if (w.kind == ModelKind::mlp) return forward_with(w, nullptr, g.features(), scale_ptr);
  const auto adj = gcn_normalize(g);
  return forward_with(w, &adj, g.features(), scale_ptr);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (hidden < 1) throw ConfigError("train: hidden units must be >= 1");
}

std::int64_t argmax_row(const Matrix& logits, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < logits.cols(); ++c) {
    if (logits(row, c) > logits(row, best)) best = c;
  }
  return best;
}

std::vector<std::int64_t> predict(const Matrix& logits) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out[static_cast<std::size_t>(r)] = argmax_row(logits, r);
  return out;
}

double accuracy(const Matrix& logits, std::span<const std::int64_t> labels, std::span<const NodeId> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t correct = 0;
  for (NodeId v : nodes) correct += argmax_row(logits, v) == labels[v] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

namespace {

struct AdamState {
  Matrix m0, v0, m1, v1;
  RowVector mb0, vb0, mb1, vb1;
};

template <typename Param>
void adam_update(Param& p, const Param& g, Param& m, Param& v, double lr, int t) {
  constexpr float beta1 = 0.9f;
  constexpr float beta2 = 0.999f;
  constexpr float eps = 1e-8f;
  m = beta1 * m + (1.0f - beta1) * g;
  v = beta2 * v + (1.0f - beta2) * g.cwiseProduct(g);
  const float c1 = 1.0f - std::pow(beta1, static_cast<float>(t));
  const float c2 = 1.0f - std::pow(beta2, static_cast<float>(t));
  p.array() -= static_cast<float>(lr) * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

ModelWeights train(const Graph& g, const TrainConfig& cfg, TrainReport* report) {
  cfg.validate();
  const auto train_nodes = g.nodes_in(Split::train);
  const auto val_nodes = g.nodes_in(Split::val);
  if (train_nodes.empty() || val_nodes.empty()) throw ConfigError("train: train and val masks must be nonempty");

  std::vector<NodeId> trval;
  std::merge(train_nodes.begin(), train_nodes.end(), val_nodes.begin(), val_nodes.end(), std::back_inserter(trval));
  const Graph g_train = induced_subgraph(g, train_nodes);
  const Graph g_val = induced_subgraph(g, trval);
  const auto adj_train = gcn_normalize(g_train);
  const auto adj_val = gcn_normalize(g_val);
  std::vector<NodeId> all_train(train_nodes.size());
  for (std::size_t i = 0; i < all_train.size(); ++i) all_train[i] = static_cast<NodeId>(i);
  const auto val_local = g_val.nodes_in(Split::val);

  Rng init_rng = make_rng(cfg.seed, "train.init");
  Rng drop_rng = make_rng(cfg.seed, "train.dropout");
  ModelWeights w = init_weights(cfg.kind, static_cast<Eigen::Index>(g.num_features()),
                                static_cast<Eigen::Index>(g.num_classes()), init_rng, cfg.hidden);
  AdamState st{Matrix::Zero(w.W0.rows(), w.W0.cols()), Matrix::Zero(w.W0.rows(), w.W0.cols()),
               Matrix::Zero(w.W1.rows(), w.W1.cols()), Matrix::Zero(w.W1.rows(), w.W1.cols()),
               RowVector::Zero(w.b0.size()),          RowVector::Zero(w.b0.size()),
               RowVector::Zero(w.b1.size()),          RowVector::Zero(w.b1.size())};

  ModelWeights best = w;
  double best_val = -1.0;
  int best_epoch = 0;
  int epoch = 0;
  const auto wd = static_cast<float>(cfg.weight_decay);
  const auto keep_scale = static_cast<float>(1.0 / (1.0 - cfg.dropout));
  Matrix scale(static_cast<Eigen::Index>(train_nodes.size()), cfg.hidden);
  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const Matrix* scale_ptr = nullptr;
    if (cfg.dropout > 0.0) {
      for (Eigen::Index i = 0; i < scale.size(); ++i) {
        scale.data()[i] = bernoulli(drop_rng, cfg.dropout) ? 0.0f : keep_scale;
      }
      scale_ptr = &scale;
    }
    auto lg = loss_and_gradient(w, &adj_train, g_train.features(), g_train.labels(), all_train, scale_ptr);
    lg.grad.W0 += wd * w.W0;
    lg.grad.W1 += wd * w.W1;
    adam_update(w.W0, lg.grad.W0, st.m0, st.v0, cfg.learning_rate, epoch);
    adam_update(w.b0, lg.grad.b0, st.mb0, st.vb0, cfg.learning_rate, epoch);
    adam_update(w.W1, lg.grad.W1, st.m1, st.v1, cfg.learning_rate, epoch);
    adam_update(w.b1, lg.grad.b1, st.mb1, st.vb1, cfg.learning_rate, epoch);

    const Matrix val_logits = forward_with(w, &adj_val, g_val.features());
    const double val_acc = accuracy(val_logits, g_val.labels(), val_local);
    if (val_acc > best_val) {
      best_val = val_acc;
      best = w;
      best_epoch = epoch;
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }

  if (report) {
    report->epochs_run = std::min(epoch, cfg.max_epochs);
    report->best_epoch = best_epoch;
    report->train_accuracy = accuracy(forward_with(best, &adj_train, g_train.features()), g_train.labels(), all_train);
    report->val_accuracy = best_val;
    const auto test_nodes = g.nodes_in(Split::test);
    report->test_accuracy = accuracy(forward(best, g), g.labels(), test_nodes);
  }
  return best;
}

std::vector<Matrix> stacked_forward(const ModelWeights& w, const Graph& base, std::span<const Candidate> cands,
                                    std::span<const NodeId> nodes, std::size_t max_copies_per_pass) {
  if (max_copies_per_pass == 0) throw ConfigError("stacked_forward: max_copies_per_pass must be >= 1");
  const std::size_t n = base.num_nodes();
  const Eigen::Index classes = w.num_classes();
  const auto rows = static_cast<Eigen::Index>(nodes.size());
  std::vector<Matrix> out;
  out.reserve(cands.size());
  check_shapes(w, base.features());

  if (w.kind == ModelKind::mlp) {
    for (const auto& c : cands) decode_flips(c, n);  // validation only
    const Matrix full = forward_with(w, nullptr, base.features());
    Matrix sel(rows, classes);
    for (Eigen::Index i = 0; i < rows; ++i) sel.row(i) = full.row(nodes[static_cast<std::size_t>(i)]);
    out.assign(cands.size(), sel);
    return out;
  }

  const Matrix z = base.features() * w.W0;
  const Eigen::Index h = z.cols();
  for (std::size_t start = 0; start < cands.size(); start += max_copies_per_pass) {
    const std::size_t k = std::min(max_copies_per_pass, cands.size() - start);
    // Block-diagonal union of k perturbed copies.
    std::vector<std::uint32_t> offsets(k * n + 1, 0);
    std::vector<std::uint32_t> cols;
    for (std::size_t j = 0; j < k; ++j) {
      const Graph gj = apply_perturbation(base, cands[start + j]);
      const auto shift = static_cast<std::uint32_t>(j * n);
      for (NodeId u = 0; u < n; ++u) {
        for (NodeId v : gj.neighbors(u)) cols.push_back(v + shift);
        offsets[j * n + u + 1] = static_cast<std::uint32_t>(cols.size());
      }
    }
    const Graph stacked = Graph().with_adjacency(std::move(offsets), std::move(cols));
    const auto adj = gcn_normalize(stacked);

    // Layer 1 over all copies; the feature transform is shared, so columns map back via mod n.
    Matrix hidden(static_cast<Eigen::Index>(k * n), h);
    for (std::size_t u = 0; u < k * n; ++u) {
      float* dst = hidden.data() + static_cast<Eigen::Index>(u) * h;
      for (Eigen::Index j = 0; j < h; ++j) dst[j] = 0.0f;
      for (auto e = adj.row_offsets[u]; e < adj.row_offsets[u + 1]; ++e) {
        const float val = adj.values[e];
        const float* src = z.data() + static_cast<Eigen::Index>(adj.col_indices[e] % n) * h;
        for (Eigen::Index j = 0; j < h; ++j) dst[j] += val * src[j];
      }
      for (Eigen::Index j = 0; j < h; ++j) dst[j] = std::max(dst[j] + w.b0[j], 0.0f);
    }
    const Matrix g = hidden * w.W1;
    for (std::size_t j = 0; j < k; ++j) {
      Matrix logits(rows, classes);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const std::size_t u = j * n + nodes[static_cast<std::size_t>(i)];
        RowVector acc = RowVector::Zero(classes);
        for (auto e = adj.row_offsets[u]; e < adj.row_offsets[u + 1]; ++e) {
          acc += adj.values[e] * g.row(adj.col_indices[e]);
        }
        logits.row(i) = acc + w.b1;
      }
      out.push_back(std::move(logits));
    }
  }
  return out;
}

void save_weights(const std::filesystem::path& path, const ModelWeights& w) {
  using grph::DType;
  using grph::Section;
  auto flat = [](const auto& m) { return std::vector<float>(m.data(), m.data() + m.size()); };
  const auto d = static_cast<std::uint64_t>(w.W0.rows());
  const auto h = static_cast<std::uint64_t>(w.W0.cols());
  const auto c = static_cast<std::uint64_t>(w.W1.cols());
  grph::Container box;
  box.sections.push_back(Section::make("kind", DType::u8, {1}, std::vector<std::uint8_t>{static_cast<std::uint8_t>(w.kind)}));
  box.sections.push_back(Section::make("W0", DType::f32, {d, h}, flat(w.W0)));
  box.sections.push_back(Section::make("b0", DType::f32, {h}, flat(w.b0)));
  box.sections.push_back(Section::make("W1", DType::f32, {h, c}, flat(w.W1)));
  box.sections.push_back(Section::make("b1", DType::f32, {c}, flat(w.b1)));
  grph::write_file(path, box);
}

ModelWeights load_weights(const std::filesystem::path& path) {
  const auto box = grph::read_file(path);
  ModelWeights w;
  const auto kind = box.at("kind").as<std::uint8_t>();
  if (kind.size() != 1 || kind[0] > 1) throw FormatError("weights: invalid kind section");
  w.kind = static_cast<ModelKind>(kind[0]);
  auto load_matrix = [&box](const std::string& name) {
    const auto& s = box.at(name);
    if (s.shape.size() != 2) throw FormatError("weights: section '" + name + "' must be 2-D");
    Matrix m(static_cast<Eigen::Index>(s.shape[0]), static_cast<Eigen::Index>(s.shape[1]));
    const auto vals = s.as<float>();
    std::copy(vals.begin(), vals.end(), m.data());
    return m;
  };
  auto load_vector = [&box](const std::string& name) {
    const auto vals = box.at(name).as<float>();
    RowVector v(static_cast<Eigen::Index>(vals.size()));
    std::copy(vals.begin(), vals.end(), v.data());
    return v;
  };
  w.W0 = load_matrix("W0");
  w.b0 = load_vector("b0");
  w.W1 = load_matrix("W1");
  w.b1 = load_vector("b1");
  if (w.b0.size() != w.W0.cols() || w.W1.rows() != w.W0.cols() || w.b1.size() != w.W1.cols()) {
    throw DimensionError("weights: inconsistent tensor shapes in '" + path.string() + "'");
  }
  for (const auto* m : {&w.W0, &w.W1}) {
    if (!m->allFinite()) throw FormatError("weights: non-finite entries in '" + path.string() + "'");
  }
  return w;
}

}  // namespace evagraph
