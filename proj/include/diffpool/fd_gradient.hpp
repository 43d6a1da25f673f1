#pragma once

#include <functional>
#include <span>

#include "diffpool/matrix.hpp"

namespace diffpool {

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(θ+h·e_i) − f(θ−h·e_i)) / 2h, one
/// coordinate at a time. Throws OracleError if f is non-finite at any probe.
Vector fd_gradient(const ScalarFn& f, std::span<const double> theta, double h = 1e-5);

/// |a − b| / max(|a|, |b|, floor). The floor keeps entries whose true value is
/// near zero from being judged on finite-difference round-off alone.
double relative_error(double analytic, double numeric, double floor = 1e-4);

/// Largest relative_error over paired entries.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = 1e-4);

}  // namespace diffpool
