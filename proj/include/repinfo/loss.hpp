#pragma once

#include "repinfo/tensor.hpp"

#include <span>
#include <vector>

namespace repinfo {

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Per-row -log2 softmax(logits)[label].
std::vector<double> cross_entropy_bits_rows(const Matrix& logits, std::span<const int> labels);

/// Mean over rows of -log2 softmax(logits)[label]. Never negative.
double softmax_cross_entropy_bits(const Matrix& logits, std::span<const int> labels);

/// d(mean CE in bits)/d(logits) = (softmax - onehot) / (rows * ln 2).
Matrix cross_entropy_bits_gradient(const Matrix& logits, std::span<const int> labels);

/// Index of the largest entry per row; the lowest index wins ties.
std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace repinfo
