#pragma once

#include <span>
#include <vector>

#include "lgfed/nn/network.hpp"

namespace lgfed::nn {

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d(mean loss) / d(logits or outputs)
};

/// Mean softmax cross-entropy, computed in log-sum-exp form.
/// Throws DataError when a label falls outside [0, logits.cols()).
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Mean over the batch of the summed squared residual (no 1/2 factor).
LossResult squared_error(const Matrix& outputs, const Matrix& targets);

Matrix softmax(const Matrix& logits);

// Row-wise argmax; ties resolve to the smallest column index.
std::vector<int> argmax_rows(const Matrix& scores);

}  // namespace lgfed::nn
