#pragma once

#include <cstddef>

#include "diffpool/activation.hpp"
#include "diffpool/matrix.hpp"

namespace diffpool {

/// Layout of a pooling layer: `num_pools` non-overlapping, contiguous groups of
/// `pool_size` inputs. Pool k owns input columns [k*K, (k+1)*K).
struct PoolSpec {
  std::size_t pool_size = 1;
  std::size_t num_pools = 1;
  bool normalize = false;  // Lp only: divide the power sum by K

  std::size_t input_width() const { return pool_size * num_pools; }
  void validate() const;
  bool operator==(const PoolSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Lp-norm pooling with learnable order.
//
//   f_k(a) = ( [1/K] * sum_{i in R_k} |a_i|^{p_k} )^{1/p_k},   p_k = max(1, rho_k)
//
// Magnitudes are thresholded, |a_i| -> max(|a_i|, eps), identically in the
// forward value and all derivatives.

inline constexpr double kLpEpsilon = 1e-8;

struct LpPoolParams {
  Vector rho;
};

/// p = max(1, rho). Stored rho is never clamped.
inline double effective_order(double rho) { return rho > 1.0 ? rho : 1.0; }

/// Forward cache. Per (sample, pool) the power sum is held as scale^p * ratio_sum
/// so that large orders neither overflow nor underflow; scale is 1 whenever
/// the plain sum is representable.
struct LpWorkspace {
  PoolSpec spec;
  double eps = kLpEpsilon;
  Vector order;       // p_k
  Vector gate;        // d zeta / d rho: 1 if rho_k > 1 else 0
  Matrix input;       // a, batch x P*K
  Matrix scale;       // batch x P
  Matrix ratio_sum;   // batch x P, sum_i (max(|a_i|,eps)/scale)^p
  Matrix output;      // batch x P
  bool valid = false;
};

struct LpForward {
  Matrix out;
  LpWorkspace ws;
};

LpForward lp_forward(const Matrix& a, const PoolSpec& spec, const LpPoolParams& params,
                     double eps = kLpEpsilon);

struct LpGrads {
  Matrix grad_a;
  Vector grad_rho;
};

LpGrads lp_backward(const LpWorkspace& ws, const Matrix& grad_out);

// ---------------------------------------------------------------------------
// Gaussian-kernel pooling.
//
//   z_i = eta_k * phi(a_i)
//   v_i = exp(-beta_k/2 * (z_i - mu_k)^2),   u_i = v_i / sum_j v_j
//   f_k = sum_i u_i z_i

struct GaussPoolParams {
  Vector mu;
  Vector beta;
  Vector eta;
};

struct GaussWorkspace {
  PoolSpec spec;
  ActivationKind act = ActivationKind::tanh;
  GaussPoolParams params;
  Matrix phi;      // phi(a)
  Matrix z;        // eta * phi(a)
  Matrix kernel;   // v, rescaled per pool so its largest entry is 1
  Matrix weights;  // u
  Matrix kernel_sum;  // batch x P, sum of the rescaled v
  Matrix output;
  bool valid = false;
};

struct GaussForward {
  Matrix out;
  GaussWorkspace ws;
};

/// `act` must be tanh or sigmoid.
GaussForward gauss_forward(const Matrix& a, const PoolSpec& spec, const GaussPoolParams& params,
                           ActivationKind act = ActivationKind::tanh);

struct GaussGrads {
  Matrix grad_a;
  Vector grad_mu;
  Vector grad_beta;
  Vector grad_eta;
};

GaussGrads gauss_backward(const GaussWorkspace& ws, const Matrix& grad_out);

// ---------------------------------------------------------------------------
// LHUC amplitude scaling of pooled outputs: out = 2*sigmoid(r_k) * pooled.

struct LhucParams {
  Vector r;
};

double lhuc_amplitude(double r);

Matrix lhuc_apply(const Matrix& pooled, const LhucParams& params);

struct LhucGrads {
  Matrix grad_pooled;
  Vector grad_r;
};

LhucGrads lhuc_backward(const Matrix& pooled, const LhucParams& params, const Matrix& grad_out);

}  // namespace diffpool
