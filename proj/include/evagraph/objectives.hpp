#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evagraph/common.hpp"
#include "evagraph/graph.hpp"

namespace evagraph {

// Fitness functions. Logits rows are aligned with `labels` (one row per node
// under attack). Higher fitness means a stronger attack.

enum class FitnessKind { accuracy, cross_entropy, tanh_margin, conformal_coverage, conformal_set_size, certified_ratio };

std::string to_string(FitnessKind k);
FitnessKind parse_fitness_kind(const std::string& s);

/// Misclassification rate; argmax ties go to the smallest class id.
double fit_accuracy(const Matrix& logits, std::span<const std::int64_t> labels);

/// Mean of -tanh(z_y - max_{c != y} z_c), in [-1, 1].
double fit_tanh_margin(const Matrix& logits, std::span<const std::int64_t> labels);

/// Mean negative log-softmax of the true class.
double fit_cross_entropy(const Matrix& logits, std::span<const std::int64_t> labels);

enum class ConformalScore { tps };

/// tau = k-th smallest score, k = ceil((m + 1)(1 - alpha)); +inf when k > m.
double conformal_calibrate(std::span<const double> scores, double alpha);

/// 1 - softmax(logits)[label] per row.
std::vector<double> tps_scores(const Matrix& logits, std::span<const std::int64_t> labels);

struct ConformalOutcome {
  double tau = 0.0;
  double coverage = 0.0;
  double mean_set_size = 0.0;
};

/// Calibrates on (cal_logits, cal_labels) and evaluates sets {c : 1 - softmax_c <= tau} on the test rows.
ConformalOutcome conformal_evaluate(const Matrix& cal_logits, std::span<const std::int64_t> cal_labels,
                                    const Matrix& test_logits, std::span<const std::int64_t> test_labels,
                                    double alpha);

/// 1 - coverage over the test rows.
double fit_conformal_coverage(const Matrix& cal_logits, std::span<const std::int64_t> cal_labels,
                              const Matrix& test_logits, std::span<const std::int64_t> test_labels, double alpha);

/// Mean prediction-set size over the test rows.
double fit_conformal_set_size(const Matrix& cal_logits, std::span<const std::int64_t> cal_labels,
                              const Matrix& test_logits, std::span<const std::int64_t> test_labels, double alpha);

/// Fraction of nodes whose smooth probability is below pbar.
double fit_certified_ratio(std::span<const double> smooth_probs, double pbar);

/// Smallest p in [0.5, 1] (within tol) with certified(p) true, by bisection.
/// Throws NoThresholdError when certified(1.0) is false.
double find_pbar(const std::function<bool(double)>& certified, double tol = 1e-4);

struct SmoothingParams {
  double p_plus = 0.001;
  double p_minus = 0.4;
  std::size_t samples_attack = 200;
  std::size_t samples_final = 1000;
  double pbar = 0.7;
  double lambda = 0.0;

  void validate() const;
};

struct FitnessSpec {
  FitnessKind kind = FitnessKind::accuracy;
  double alpha = 0.1;
  ConformalScore score = ConformalScore::tps;
  SmoothingParams smoothing;

  void validate() const;
};

}  // namespace evagraph
