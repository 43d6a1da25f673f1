#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace diffpool {

enum class GradcheckOp { lp, gauss, lhuc, model };

std::string_view to_string(GradcheckOp op);
GradcheckOp parse_gradcheck_op(std::string_view name);

struct GradcheckOptions {
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tolerance = 1e-5;
};

struct GradcheckResult {
  GradcheckOp op = GradcheckOp::lp;
  std::size_t trials = 0;
  // Largest relative error per parameter class, e.g. "a", "rho", "model.mu".
  std::map<std::string, double> max_error;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

/// Compares analytic gradients against central differences on `trials`
/// seeded random configurations. Configurations cycle through pool sizes
/// {2,3,5} and batch sizes {1,4}; the sampler only emits smooth points:
/// Lp inputs with |a| > 0.1 and |rho - 1| > 1e-2, Gauss pools whose z values
/// differ pairwise by more than 1e-3.
GradcheckResult run_gradcheck(GradcheckOp op, const GradcheckOptions& opts = {});

}  // namespace diffpool
