#include "diffpool/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffpool/errors.hpp"

namespace diffpool {
namespace {

void check_pool_input(const Matrix& a, const PoolSpec& spec, std::size_t param_len,
                      const char* what) {
  spec.validate();
  if (a.cols() != spec.input_width()) {
    throw DimensionError(std::string(what) + ": input has " + std::to_string(a.cols()) +
                         " columns, pool layout needs " + std::to_string(spec.input_width()));
  }
  if (param_len != spec.num_pools) {
    throw DimensionError(std::string(what) + ": " + std::to_string(param_len) +
                         " pool parameters for " + std::to_string(spec.num_pools) + " pools");
  }
}

void check_grad_out(bool valid, const Matrix& output, const Matrix& grad_out, const char* what) {
  if (!valid) throw ContractViolation(std::string(what) + ": workspace holds no forward pass");
  if (grad_out.rows() != output.rows() || grad_out.cols() != output.cols()) {
    throw ContractViolation(std::string(what) + ": gradient is " +
                            std::to_string(grad_out.rows()) + "x" +
                            std::to_string(grad_out.cols()) + " but workspace was built for " +
                            std::to_string(output.rows()) + "x" + std::to_string(output.cols()));
  }
}

// Beyond this |p*log2(scale)| the plain power sum is computed in scaled form.
constexpr double kDirectSumExponentLimit = 900.0;

double pow_order(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  return std::pow(x, p);
}

double root_order(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return std::sqrt(x);
  return std::pow(x, 1.0 / p);
}

}  // namespace

void PoolSpec::validate() const {
  if (pool_size < 1) throw ConfigError("pool size K must be >= 1");
  if (num_pools < 1) throw ConfigError("number of pools must be >= 1");
}

// ---------------------------------------------------------------------------
// Lp

LpForward lp_forward(const Matrix& a, const PoolSpec& spec, const LpPoolParams& params,
                     double eps) {
  check_pool_input(a, spec, params.rho.size(), "lp_forward");
  const std::size_t batch = a.rows();
  const std::size_t P = spec.num_pools;
  const std::size_t K = spec.pool_size;

  LpForward r;
  LpWorkspace& ws = r.ws;
  ws.spec = spec;
  ws.eps = eps;
  ws.input = a;
  ws.order.resize(P);
  ws.gate.resize(P);
  for (std::size_t k = 0; k < P; ++k) {
    ws.order[k] = effective_order(params.rho[k]);
    ws.gate[k] = params.rho[k] > 1.0 ? 1.0 : 0.0;
  }
  ws.scale = Matrix(batch, P, 1.0);
  ws.ratio_sum = Matrix(batch, P);
  r.out = Matrix(batch, P);

  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t k = 0; k < P; ++k) {
      const double p = ws.order[k];
      double largest = eps;
      for (std::size_t i = k * K; i < (k + 1) * K; ++i) {
        largest = std::max(largest, std::abs(a(n, i)));
      }
      const double scale =
          std::abs(p * std::log2(largest)) < kDirectSumExponentLimit ? 1.0 : largest;
      double sum = 0.0;
      for (std::size_t i = k * K; i < (k + 1) * K; ++i) {
        const double mag = std::max(std::abs(a(n, i)), eps);
        sum += pow_order(scale == 1.0 ? mag : mag / scale, p);
      }
      ws.scale(n, k) = scale;
      ws.ratio_sum(n, k) = sum;
      const double mean_or_sum = spec.normalize ? sum / static_cast<double>(K) : sum;
      r.out(n, k) = scale * root_order(mean_or_sum, p);
    }
  }
  ws.output = r.out;
  ws.valid = true;
  return r;
}

LpGrads lp_backward(const LpWorkspace& ws, const Matrix& grad_out) {
  check_grad_out(ws.valid, ws.output, grad_out, "lp_backward");
  const std::size_t batch = ws.input.rows();
  const std::size_t P = ws.spec.num_pools;
  const std::size_t K = ws.spec.pool_size;
  const double log_k = std::log(static_cast<double>(K));

  LpGrads g{Matrix(batch, ws.input.cols()), Vector(P, 0.0)};
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t k = 0; k < P; ++k) {
      const double go = grad_out(n, k);
      const double p = ws.order[k];
      const double scale = ws.scale(n, k);
      const double sum = ws.ratio_sum(n, k);
      const double f = ws.output(n, k);

      bool degenerate = true;
      for (std::size_t i = k * K; i < (k + 1) * K; ++i) {
        if (std::abs(ws.input(n, i)) > ws.eps) degenerate = false;
      }
      // All magnitudes at the threshold: the pool is the stabilised zero
      // vector and contributes no gradient.
      if (degenerate || sum <= 0.0) continue;

      // d f / d a_i = a_i |a_i|^{p-2} / sum_j |a_j|^p * G_i, with G_i = f.
      double weighted_log = 0.0;
      for (std::size_t i = k * K; i < (k + 1) * K; ++i) {
        const double a_i = ws.input(n, i);
        const double mag = std::max(std::abs(a_i), ws.eps);
        const double ratio = mag / scale;
        const double ratio_p = pow_order(ratio, p);
        weighted_log += std::log(mag) * ratio_p;
        if (std::abs(a_i) > ws.eps) {
          const double sign = a_i > 0.0 ? 1.0 : -1.0;
          g.grad_a(n, i) = go * sign * (ratio_p / ratio) / (scale * sum) * f;
        }
      }

      if (ws.gate[k] == 0.0) continue;
      // d f / d rho = ( sum_i log|a_i| |a_i|^p / (p S) - log S / p^2 ) * f,
      // with S the (optionally 1/K-normalised) power sum. Both terms are
      // evaluated on the scaled sum; the scale's log cancels between them.
      double log_sum = p * std::log(scale) + std::log(sum);
      if (ws.spec.normalize) log_sum -= log_k;
      const double dfdrho = (weighted_log / (p * sum) - log_sum / (p * p)) * f;
      g.grad_rho[k] += go * dfdrho * ws.gate[k];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Gauss

GaussForward gauss_forward(const Matrix& a, const PoolSpec& spec, const GaussPoolParams& params,
                           ActivationKind act) {
  check_pool_input(a, spec, params.mu.size(), "gauss_forward");
  if (params.beta.size() != spec.num_pools || params.eta.size() != spec.num_pools) {
    throw DimensionError("gauss_forward: beta/eta length does not match number of pools");
  }
  if (act != ActivationKind::tanh && act != ActivationKind::sigmoid) {
    throw ConfigError("gauss_forward: pool inputs need a bounded nonlinearity (tanh or sigmoid), got " +
                      std::string(to_string(act)));
  }
  const std::size_t batch = a.rows();
  const std::size_t P = spec.num_pools;
  const std::size_t K = spec.pool_size;

  GaussForward r;
  GaussWorkspace& ws = r.ws;
  ws.spec = spec;
  ws.act = act;
  ws.params = params;
  ws.phi = activation_forward(a, act);
  ws.z = Matrix(batch, a.cols());
  ws.kernel = Matrix(batch, a.cols());
  ws.weights = Matrix(batch, a.cols());
  ws.kernel_sum = Matrix(batch, P);
  r.out = Matrix(batch, P);

  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t k = 0; k < P; ++k) {
      const double mu = params.mu[k];
      const double beta = params.beta[k];
      const double eta = params.eta[k];
      const std::size_t lo = k * K;
      const std::size_t hi = lo + K;

      double max_exponent = -INFINITY;
      for (std::size_t i = lo; i < hi; ++i) {
        ws.z(n, i) = eta * ws.phi(n, i);
        const double d = ws.z(n, i) - mu;
        ws.kernel(n, i) = -0.5 * beta * d * d;
        max_exponent = std::max(max_exponent, ws.kernel(n, i));
      }
      // Subtracting the largest exponent leaves u unchanged and keeps the
      // kernel sum >= 1, so large |beta| cannot underflow it to zero.
      double sum = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        ws.kernel(n, i) = std::exp(ws.kernel(n, i) - max_exponent);
        sum += ws.kernel(n, i);
      }
      ws.kernel_sum(n, k) = sum;

      // f = sum u_i z_i, accumulated relative to z_lo so that tied inputs
      // return exactly that value.
      const double z_ref = ws.z(n, lo);
      double f = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        ws.weights(n, i) = ws.kernel(n, i) / sum;
        f += ws.weights(n, i) * (ws.z(n, i) - z_ref);
      }
      r.out(n, k) = z_ref + f;
    }
  }
  ws.output = r.out;
  ws.valid = true;
  return r;
}

GaussGrads gauss_backward(const GaussWorkspace& ws, const Matrix& grad_out) {
  check_grad_out(ws.valid, ws.output, grad_out, "gauss_backward");
  const std::size_t batch = ws.z.rows();
  const std::size_t P = ws.spec.num_pools;
  const std::size_t K = ws.spec.pool_size;

  GaussGrads g{Matrix(batch, ws.z.cols()), Vector(P, 0.0), Vector(P, 0.0), Vector(P, 0.0)};
  Vector centred(K), zt_ju(K);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t k = 0; k < P; ++k) {
      const double go = grad_out(n, k);
      const double mu = ws.params.mu[k];
      const double beta = ws.params.beta[k];
      const double eta = ws.params.eta[k];
      const double sum = ws.kernel_sum(n, k);
      const std::size_t lo = k * K;
      const auto z = ws.z.row(n).subspan(lo, K);
      const auto v = ws.kernel.row(n).subspan(lo, K);
      const auto u = ws.weights.row(n).subspan(lo, K);
      const auto phi = ws.phi.row(n).subspan(lo, K);

      // z^T J_u, with J_u[i][j] = du_i/dv_j = (delta_ij - u_i) / sum v.
      // Columns of J_u sum to zero, so z may be shifted by a constant first;
      // shifting by z_0 makes tied pools give exact zeros.
      for (std::size_t i = 0; i < K; ++i) centred[i] = z[i] - z[0];
      for (std::size_t j = 0; j < K; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
          const double ju = ((i == j ? 1.0 : 0.0) - u[i]) / sum;
          acc += centred[i] * ju;
        }
        zt_ju[j] = acc;
      }

      double dmu = 0.0;
      double dbeta = 0.0;
      double deta = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        const double diff = z[j] - mu;
        const double jv_z = -beta * diff * v[j];         // dv_j/dz_j
        const double jv_beta = -0.5 * diff * diff * v[j];  // dv_j/dbeta
        const double kernel_path = zt_ju[j] * jv_z;
        const double dfdz = kernel_path + u[j];
        dmu -= kernel_path;  // dv/dmu = -dv/dz
        dbeta += zt_ju[j] * jv_beta;
        deta += dfdz * phi[j];
        const double dphi = ws.act == ActivationKind::tanh ? 1.0 - phi[j] * phi[j]
                                                           : phi[j] * (1.0 - phi[j]);
        g.grad_a(n, lo + j) = go * dfdz * eta * dphi;
      }
      g.grad_mu[k] += go * dmu;
      g.grad_beta[k] += go * dbeta;
      g.grad_eta[k] += go * deta;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// LHUC

double lhuc_amplitude(double r) { return 2.0 * sigmoid(r); }

Matrix lhuc_apply(const Matrix& pooled, const LhucParams& params) {
  if (params.r.size() != pooled.cols()) {
    throw DimensionError("lhuc_apply: " + std::to_string(params.r.size()) + " amplitudes for " +
                         std::to_string(pooled.cols()) + " units");
  }
  Matrix out = pooled;
  for (std::size_t n = 0; n < out.rows(); ++n) {
    for (std::size_t k = 0; k < out.cols(); ++k) out(n, k) *= lhuc_amplitude(params.r[k]);
  }
  return out;
}

LhucGrads lhuc_backward(const Matrix& pooled, const LhucParams& params, const Matrix& grad_out) {
  if (params.r.size() != pooled.cols() || grad_out.rows() != pooled.rows() ||
      grad_out.cols() != pooled.cols()) {
    throw DimensionError("lhuc_backward: shape mismatch");
  }
  LhucGrads g{Matrix(pooled.rows(), pooled.cols()), Vector(params.r.size(), 0.0)};
  for (std::size_t k = 0; k < pooled.cols(); ++k) {
    const double s = sigmoid(params.r[k]);
    const double amp = 2.0 * s;
    const double damp = 2.0 * s * (1.0 - s);
    for (std::size_t n = 0; n < pooled.rows(); ++n) {
      g.grad_pooled(n, k) = grad_out(n, k) * amp;
      g.grad_r[k] += grad_out(n, k) * pooled(n, k) * damp;
    }
  }
  return g;
}

}  // namespace diffpool
