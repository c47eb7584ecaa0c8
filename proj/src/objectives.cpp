#include "evagraph/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evagraph/gnn.hpp"

namespace evagraph {

namespace {

void check_rows(const Matrix& logits, std::span<const std::int64_t> labels) {
  if (labels.empty()) throw ConfigError("fitness over an empty node set");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw DimensionError("fitness: logits rows do not match labels");
  }
  for (auto y : labels) {
    if (y < 0 || y >= logits.cols()) throw DimensionError("fitness: label out of range");
  }
}

// Softmax of one row in double precision.
void softmax_row(const Matrix& logits, Eigen::Index r, std::vector<double>& out) {
  const Eigen::Index classes = logits.cols();
  out.resize(static_cast<std::size_t>(classes));
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < classes; ++c) mx = std::max(mx, static_cast<double>(logits(r, c)));
  double total = 0.0;
  for (Eigen::Index c = 0; c < classes; ++c) {
    out[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(logits(r, c)) - mx);
    total += out[static_cast<std::size_t>(c)];
  }
  for (auto& p : out) p /= total;
}

}  // namespace

std::string to_string(FitnessKind k) {
  switch (k) {
    case FitnessKind::accuracy: return "accuracy";
    case FitnessKind::cross_entropy: return "ce";
    case FitnessKind::tanh_margin: return "tanh-margin";
    case FitnessKind::conformal_coverage: return "conformal-coverage";
    case FitnessKind::conformal_set_size: return "conformal-size";
    case FitnessKind::certified_ratio: return "certified-ratio";
  }
  return "accuracy";
}

FitnessKind parse_fitness_kind(const std::string& s) {
  if (s == "accuracy") return FitnessKind::accuracy;
  if (s == "ce" || s == "cross-entropy") return FitnessKind::cross_entropy;
  if (s == "tanh-margin") return FitnessKind::tanh_margin;
  if (s == "conformal-coverage") return FitnessKind::conformal_coverage;
  if (s == "conformal-size") return FitnessKind::conformal_set_size;
  if (s == "certified-ratio") return FitnessKind::certified_ratio;
  throw ConfigError("unknown objective '" + s + "'");
}

double fit_accuracy(const Matrix& logits, std::span<const std::int64_t> labels) {
  check_rows(logits, labels);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    wrong += argmax_row(logits, static_cast<Eigen::Index>(i)) != labels[i] ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double fit_tanh_margin(const Matrix& logits, std::span<const std::int64_t> labels) {
  if (logits.cols() < 2) throw ConfigError("tanh-margin needs at least two classes");
  check_rows(logits, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double other = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      if (c != labels[i]) other = std::max(other, static_cast<double>(logits(r, c)));
    }
    total += -std::tanh(static_cast<double>(logits(r, labels[i])) - other);
  }
  return total / static_cast<double>(labels.size());
}

double fit_cross_entropy(const Matrix& logits, std::span<const std::int64_t> labels) {
  check_rows(logits, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) mx = std::max(mx, static_cast<double>(logits(r, c)));
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(static_cast<double>(logits(r, c)) - mx);
    total += mx + std::log(sum) - static_cast<double>(logits(r, labels[i]));
  }
  return total / static_cast<double>(labels.size());
}

double conformal_calibrate(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw ConfigError("conformal calibration needs at least one score");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const double m = static_cast<double>(scores.size());
  // Guard against (m+1)(1-alpha) landing a hair above an integer.
  const auto k = static_cast<std::size_t>(std::ceil((m + 1.0) * (1.0 - alpha) - 1e-9));
  if (k > scores.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

std::vector<double> tps_scores(const Matrix& logits, std::span<const std::int64_t> labels) {
  check_rows(logits, labels);
  std::vector<double> out(labels.size());
  std::vector<double> probs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    softmax_row(logits, static_cast<Eigen::Index>(i), probs);
    out[i] = 1.0 - probs[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

ConformalOutcome conformal_evaluate(const Matrix& cal_logits, std::span<const std::int64_t> cal_labels,
                                    const Matrix& test_logits, std::span<const std::int64_t> test_labels,
                                    double alpha) {
  if (cal_labels.empty()) throw ConfigError("conformal: calibration set is empty");
  check_rows(test_logits, test_labels);
  ConformalOutcome out;
  out.tau = conformal_calibrate(tps_scores(cal_logits, cal_labels), alpha);
  std::size_t covered = 0;
  std::size_t total_size = 0;
  std::vector<double> probs;
  for (std::size_t i = 0; i < test_labels.size(); ++i) {
    softmax_row(test_logits, static_cast<Eigen::Index>(i), probs);
    for (std::size_t c = 0; c < probs.size(); ++c) {
      if (1.0 - probs[c] <= out.tau) {
        ++total_size;
        if (static_cast<std::int64_t>(c) == test_labels[i]) ++covered;
      }
    }
  }
  const auto m = static_cast<double>(test_labels.size());
  out.coverage = static_cast<double>(covered) / m;
  out.mean_set_size = static_cast<double>(total_size) / m;
  return out;
}

double fit_conformal_coverage(const Matrix& cal_logits, std::span<const std::int64_t> cal_labels,
                              const Matrix& test_logits, std::span<const std::int64_t> test_labels, double alpha) {
  return 1.0 - conformal_evaluate(cal_logits, cal_labels, test_logits, test_labels, alpha).coverage;
}

double fit_conformal_set_size(const Matrix& cal_logits, std::span<const std::int64_t> cal_labels,
                              const Matrix& test_logits, std::span<const std::int64_t> test_labels, double alpha) {
  return conformal_evaluate(cal_logits, cal_labels, test_logits, test_labels, alpha).mean_set_size;
}

double fit_certified_ratio(std::span<const double> smooth_probs, double pbar) {
  if (smooth_probs.empty()) throw ConfigError("certified ratio over an empty node set");
  std::size_t below = 0;
  for (double p : smooth_probs) below += p < pbar ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(smooth_probs.size());
}

double find_pbar(const std::function<bool(double)>& certified, double tol) {
  if (!(tol > 0.0)) throw ConfigError("find_pbar: tolerance must be positive");
  if (!certified(1.0)) throw NoThresholdError("certificate oracle does not certify at probability 1");
  double lo = 0.5;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (certified(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

void SmoothingParams::validate() const {
  if (!(p_plus >= 0.0 && p_plus < 1.0)) throw ConfigError("p_plus must lie in [0, 1)");
  if (!(p_minus >= 0.0 && p_minus <= 1.0)) throw ConfigError("p_minus must lie in [0, 1]");
  if (samples_attack < 1 || samples_final < 1) throw ConfigError("smoothing sample counts must be >= 1");
  if (!(pbar > 0.5 && pbar <= 1.0)) throw ConfigError("pbar must lie in (0.5, 1]");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
}

void FitnessSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (kind == FitnessKind::certified_ratio) smoothing.validate();
}

}  // namespace evagraph
