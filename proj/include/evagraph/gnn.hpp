#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evagraph/common.hpp"
#include "evagraph/graph.hpp"
#include "evagraph/rng.hpp"

namespace evagraph {

enum class ModelKind : std::uint8_t { gcn = 0, mlp = 1 };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

inline constexpr int kHiddenUnits = 64;

template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVectorT = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// Two-layer model parameters. W0: d x h, W1: h x C.
template <typename S>
struct WeightsT {
  ModelKind kind = ModelKind::gcn;
  MatrixT<S> W0;
  RowVectorT<S> b0;
  MatrixT<S> W1;
  RowVectorT<S> b1;

  Eigen::Index input_dim() const { return W0.rows(); }
  Eigen::Index hidden_dim() const { return W0.cols(); }
  Eigen::Index num_classes() const { return W1.cols(); }

  template <typename T>
  WeightsT<T> cast() const {
    return {kind, W0.template cast<T>(), b0.template cast<T>(), W1.template cast<T>(), b1.template cast<T>()};
  }
};

using ModelWeights = WeightsT<float>;

/// Glorot-uniform weights, zero biases.
ModelWeights init_weights(ModelKind kind, Eigen::Index in_dim, Eigen::Index classes, Rng& rng,
                          Eigen::Index hidden = kHiddenUnits);

/// D^{-1/2}(A+I)D^{-1/2} in CSR form; the diagonal entry sits at its sorted column position.
struct NormalizedAdjacency {
  std::vector<std::uint32_t> row_offsets;
  std::vector<std::uint32_t> col_indices;
  std::vector<float> values;

  std::size_t rows() const { return row_offsets.empty() ? 0 : row_offsets.size() - 1; }
  float at(NodeId r, NodeId c) const;

  /// this * dense. The operator is symmetric, so it also serves as its own transpose.
  template <typename S>
  MatrixT<S> multiply(const MatrixT<S>& dense) const;
};

/// 1 / sqrt(deg(v) + 1) for every node.
std::vector<float> inverse_sqrt_degrees(const Graph& g);

NormalizedAdjacency gcn_normalize(const Graph& g);

struct Dropout {
  double rate = 0.5;
  Rng* rng = nullptr;
};

/// Logits for every node. Dropout on the hidden layer only when supplied.
Matrix forward(const ModelWeights& w, const Graph& g, std::optional<Dropout> dropout = std::nullopt);

/// Same as forward() with a caller-provided propagation operator (unused for MLP).
template <typename S>
MatrixT<S> forward_with(const WeightsT<S>& w, const NormalizedAdjacency* adj, const MatrixT<S>& features,
                        const MatrixT<S>* dropout_scale = nullptr);

template <typename S>
struct LossAndGradient {
  S loss = 0;
  WeightsT<S> grad;
};

/// Mean cross-entropy over `nodes` and its analytic gradient by manual backprop.
/// `dropout_scale`, when given, is an n x h matrix of 0 or 1/(1-p) applied to the hidden layer.
template <typename S>
LossAndGradient<S> loss_and_gradient(const WeightsT<S>& w, const NormalizedAdjacency* adj,
                                     const MatrixT<S>& features, std::span<const std::int64_t> labels,
                                     std::span<const NodeId> nodes, const MatrixT<S>* dropout_scale = nullptr);

template <typename S>
S cross_entropy_loss(const WeightsT<S>& w, const NormalizedAdjacency* adj, const MatrixT<S>& features,
                     std::span<const std::int64_t> labels, std::span<const NodeId> nodes,
                     const MatrixT<S>* dropout_scale = nullptr);

struct TrainConfig {
  ModelKind kind = ModelKind::gcn;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  int max_epochs = 300;
  int patience = 50;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  int hidden = kHiddenUnits;

  void validate() const;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double train_accuracy = 0;
  double val_accuracy = 0;
  double test_accuracy = 0;
};

/// Inductive training: fit on the train-induced subgraph, select the epoch by
/// validation accuracy on the (train + val)-induced subgraph, report test
/// accuracy on the full graph.
ModelWeights train(const Graph& g, const TrainConfig& cfg, TrainReport* report = nullptr);

/// Argmax per row, ties to the smallest class id.
std::vector<std::int64_t> predict(const Matrix& logits);
std::int64_t argmax_row(const Matrix& logits, Eigen::Index row);

/// Fraction of `nodes` whose argmax equals its label. Logits rows are node ids.
double accuracy(const Matrix& logits, std::span<const std::int64_t> labels, std::span<const NodeId> nodes);

/// Logits of `nodes` for each perturbed copy of `base`, evaluated as one
/// block-diagonal graph of up to `max_copies_per_pass` disjoint copies.
std::vector<Matrix> stacked_forward(const ModelWeights& w, const Graph& base, std::span<const Candidate> cands,
                                    std::span<const NodeId> nodes, std::size_t max_copies_per_pass = 64);

void save_weights(const std::filesystem::path& path, const ModelWeights& w);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace evagraph
