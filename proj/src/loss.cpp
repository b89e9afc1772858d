#include "repinfo/loss.hpp"

#include "repinfo/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace repinfo {

namespace {

void check_labels(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ShapeError("logits have " + std::to_string(logits.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels were given");
  }
  for (int y : labels) {
    if (y < 0 || y >= logits.cols()) {
      throw InputError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(logits.cols()) + ")");
    }
  }
}

}  // namespace

void require_finite(const Matrix& m, const std::string& where) {
  if (!m.allFinite()) throw NumericalError("non-finite value in " + where);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

std::vector<double> cross_entropy_bits_rows(const Matrix& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  std::vector<double> out(labels.size());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double log_z = m + std::log((logits.row(r).array() - m).exp().sum());
    // log_z >= the label's logit, so the clamp only removes -0.0 and rounding.
    out[r] = std::max(0.0, (log_z - logits(r, labels[r])) * std::numbers::log2e);
  }
  return out;
}

double softmax_cross_entropy_bits(const Matrix& logits, std::span<const int> labels) {
  if (labels.empty()) throw InputError("cross-entropy of an empty batch");
  const auto rows = cross_entropy_bits_rows(logits, labels);
  double sum = 0.0;
  for (double v : rows) sum += v;
  return sum / static_cast<double>(rows.size());
}

Matrix cross_entropy_bits_gradient(const Matrix& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  Matrix g = softmax_rows(logits);
  for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, labels[r]) -= 1.0;
  g /= static_cast<double>(g.rows()) * std::numbers::ln2;
  return g;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = static_cast<int>(c);
    }
    out[r] = best;
  }
  return out;
}

}  // namespace repinfo
