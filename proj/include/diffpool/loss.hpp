#pragma once

#include <span>

#include "diffpool/matrix.hpp"

namespace diffpool {

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad_logits;  // (probs - onehot) / batch
};

// Mean negative log-likelihood of `targets` under row distributions `probs`.
// The returned gradient is with respect to the softmax inputs.
CrossEntropyResult cross_entropy(const Matrix& probs, std::span<const int> targets);

// Probabilities are clamped to at least this before taking the log.
inline constexpr double kProbFloor = 1e-30;

}  // namespace diffpool
