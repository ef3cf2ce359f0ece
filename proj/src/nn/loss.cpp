#include "lgfed/nn/loss.hpp"

#include <cmath>
#include <string>

#include "lgfed/common/error.hpp"

namespace lgfed::nn {

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    auto e = (logits.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ShapeError("logit rows (" + std::to_string(n) + ") and labels (" +
                     std::to_string(labels.size()) + ") differ");
  if (n == 0) throw ShapeError("cross-entropy over an empty batch");
  LossResult out;
  out.grad.resize(n, logits.cols());
  double total = 0.0;
  for (Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols())
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(logits.cols()) + ")");
    const double mx = logits.row(r).maxCoeff();
    auto shifted = logits.row(r).array() - mx;
    const double lse = std::log(shifted.exp().sum());
    total += lse - shifted(y);
    out.grad.row(r) = (shifted - lse).exp();
    out.grad(r, y) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss = total * inv;
  out.grad *= inv;
  return out;
}

LossResult squared_error(const Matrix& outputs, const Matrix& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw ShapeError("outputs and targets differ in shape");
  if (outputs.rows() == 0) throw ShapeError("squared error over an empty batch");
  const double inv = 1.0 / static_cast<double>(outputs.rows());
  const Matrix resid = outputs - targets;
  return {resid.squaredNorm() * inv, 2.0 * inv * resid};
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace lgfed::nn
