#pragma once

#include <span>
#include <string>
#include <vector>

#include "diffpool/network.hpp"

namespace diffpool {

/// Histogram of one pooling parameter ("p", "mu" or "beta") in one layer.
/// `after` holds the mean count over the supplied adapted models.
struct ParamHistogram {
  std::size_t layer = 0;
  std::string param;
  std::vector<double> edges;  // bins + 1
  std::vector<double> before;
  std::vector<double> after;
};

/// Pooling parameters that are summarised for a model: {"p"} for Lp,
/// {"mu", "beta"} for Gauss, none otherwise.
std::vector<std::string> inspected_params(const Model& model);

/// Per-layer values of `param` (p is reported as max(1, rho)).
std::vector<double> pool_param_values(const Model& model, std::size_t layer,
                                      const std::string& param);

/// Shared bin edges span every value seen before and after. Throws
/// ConfigError if any model's architecture differs from `before`.
std::vector<ParamHistogram> parameter_histograms(const Model& before,
                                                 std::span<const Model> after,
                                                 std::size_t bins = 20);

/// Rows "layer,bin_low,bin_high,count_before,count_after" for one parameter.
std::string histogram_csv(std::span<const ParamHistogram> hists, const std::string& param);

double stddev(std::span<const double> values);

}  // namespace diffpool
