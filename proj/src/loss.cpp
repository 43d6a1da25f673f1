#include "diffpool/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffpool/errors.hpp"

namespace diffpool {

CrossEntropyResult cross_entropy(const Matrix& probs, std::span<const int> targets) {
  if (targets.size() != probs.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(probs.rows()) + " rows");
  }
  CrossEntropyResult r{0.0, probs};
  if (probs.rows() == 0) return r;
  const double inv_batch = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t n = 0; n < probs.rows(); ++n) {
    const int t = targets[n];
    if (t < 0 || static_cast<std::size_t>(t) >= probs.cols()) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " out of range [0," +
                       std::to_string(probs.cols()) + ")");
    }
    r.loss -= std::log(std::max(probs(n, t), kProbFloor));
    r.grad_logits(n, t) -= 1.0;
  }
  r.loss *= inv_batch;
  for (double& g : r.grad_logits.data()) g *= inv_batch;
  return r;
}

}  // namespace diffpool
