#include "diffpool/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "diffpool/errors.hpp"
#include "diffpool/fd_gradient.hpp"
#include "diffpool/network.hpp"
#include "diffpool/pooling.hpp"
#include "diffpool/rng.hpp"
#include "diffpool/text.hpp"

namespace diffpool {
namespace {

constexpr std::size_t kPoolSizes[] = {2, 3, 5};
constexpr std::size_t kBatchSizes[] = {1, 4};

struct TrialShape {
  std::size_t pool_size;
  std::size_t batch;
  std::size_t pools;
};

TrialShape shape_for(std::size_t trial, Rng& rng) {
  return {kPoolSizes[trial % 3], kBatchSizes[(trial / 3) % 2], 1 + rng.below(2)};
}

// sum_{n,k} c[n,k] * out[n,k]; its gradient wrt out is c.
double weighted_sum(const Matrix& out, const Matrix& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * c.data()[i];
  return s;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

class Recorder {
 public:
  Recorder(GradcheckResult& r, double tol) : result_(r), tol_(tol) {}

  void check(const std::string& cls, std::span<const double> analytic,
             std::span<const double> numeric, const std::string& where) {
    const double err = max_relative_error(analytic, numeric);
    double& worst = result_.max_error[cls];
    worst = std::max(worst, err);
    if (!(err < tol_)) {
      result_.failures.push_back(where + " param=" + cls + " rel_err=" + format_double(err));
    }
  }

 private:
  GradcheckResult& result_;
  double tol_;
};

std::string describe(GradcheckOp op, std::size_t trial, const TrialShape& s) {
  std::ostringstream o;
  o << "op=" << to_string(op) << " trial=" << trial << " K=" << s.pool_size
    << " batch=" << s.batch << " pools=" << s.pools;
  return o.str();
}

void check_lp(std::size_t trial, Rng& rng, const GradcheckOptions& opts, Recorder& rec) {
  const TrialShape s = shape_for(trial, rng);
  const PoolSpec spec{s.pool_size, s.pools, rng.uniform() < 0.5};
  Matrix a(s.batch, spec.input_width());
  for (double& v : a.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 2.0);
  LpPoolParams params;
  for (std::size_t k = 0; k < s.pools; ++k) {
    const double u = rng.uniform();
    params.rho.push_back(u < 0.2 ? rng.uniform(0.2, 0.99) : u < 0.9 ? rng.uniform(1.01, 4.0)
                                                                    : rng.uniform(4.0, 12.0));
  }
  const Matrix c = random_matrix(rng, s.batch, s.pools, -1.0, 1.0);

  auto fw = lp_forward(a, spec, params);
  auto g = lp_backward(fw.ws, c);
  const std::string where = describe(GradcheckOp::lp, trial, s);

  auto fa = [&](std::span<const double> x) {
    return weighted_sum(lp_forward(Matrix(a.rows(), a.cols(), {x.begin(), x.end()}), spec, params).out, c);
  };
  rec.check("a", g.grad_a.data(), fd_gradient(fa, a.data(), opts.step), where);

  auto frho = [&](std::span<const double> x) {
    return weighted_sum(lp_forward(a, spec, {{x.begin(), x.end()}}).out, c);
  };
  rec.check("rho", g.grad_rho, fd_gradient(frho, params.rho, opts.step), where);
}

void check_gauss(std::size_t trial, Rng& rng, const GradcheckOptions& opts, Recorder& rec) {
  const TrialShape s = shape_for(trial, rng);
  const PoolSpec spec{s.pool_size, s.pools, false};
  GaussPoolParams params;
  for (std::size_t k = 0; k < s.pools; ++k) {
    params.mu.push_back(rng.normal(0.0, 0.7));
    params.beta.push_back(rng.uniform(0.1, 3.0));
    params.eta.push_back(rng.uniform(0.5, 1.5));
  }
  Matrix a(s.batch, spec.input_width());
  for (std::size_t n = 0; n < s.batch; ++n) {
    for (std::size_t k = 0; k < s.pools; ++k) {
      // Resample the pool until its z values are pairwise >= 1e-3 apart.
      bool ok = false;
      while (!ok) {
        for (std::size_t i = 0; i < s.pool_size; ++i) a(n, k * s.pool_size + i) = rng.uniform(-2.0, 2.0);
        ok = true;
        for (std::size_t i = 0; i < s.pool_size && ok; ++i) {
          for (std::size_t j = i + 1; j < s.pool_size && ok; ++j) {
            const double zi = params.eta[k] * std::tanh(a(n, k * s.pool_size + i));
            const double zj = params.eta[k] * std::tanh(a(n, k * s.pool_size + j));
            ok = std::abs(zi - zj) > 1e-3;
          }
        }
      }
    }
  }
  const Matrix c = random_matrix(rng, s.batch, s.pools, -1.0, 1.0);
  auto fw = gauss_forward(a, spec, params);
  auto g = gauss_backward(fw.ws, c);
  const std::string where = describe(GradcheckOp::gauss, trial, s);

  auto fa = [&](std::span<const double> x) {
    return weighted_sum(gauss_forward(Matrix(a.rows(), a.cols(), {x.begin(), x.end()}), spec, params).out, c);
  };
  rec.check("a", g.grad_a.data(), fd_gradient(fa, a.data(), opts.step), where);

  auto with = [&](Vector GaussPoolParams::*field) {
    return [&, field](std::span<const double> x) {
      GaussPoolParams p = params;
      p.*field = Vector(x.begin(), x.end());
      return weighted_sum(gauss_forward(a, spec, p).out, c);
    };
  };
  rec.check("mu", g.grad_mu, fd_gradient(with(&GaussPoolParams::mu), params.mu, opts.step), where);
  rec.check("beta", g.grad_beta, fd_gradient(with(&GaussPoolParams::beta), params.beta, opts.step), where);
  rec.check("eta", g.grad_eta, fd_gradient(with(&GaussPoolParams::eta), params.eta, opts.step), where);
}

void check_lhuc(std::size_t trial, Rng& rng, const GradcheckOptions& opts, Recorder& rec) {
  const TrialShape s = shape_for(trial, rng);
  const Matrix pooled = random_matrix(rng, s.batch, s.pools, -2.0, 2.0);
  LhucParams params;
  for (std::size_t k = 0; k < s.pools; ++k) params.r.push_back(rng.normal(0.0, 1.5));
  const Matrix c = random_matrix(rng, s.batch, s.pools, -1.0, 1.0);
  auto g = lhuc_backward(pooled, params, c);
  const std::string where = describe(GradcheckOp::lhuc, trial, s);

  auto fp = [&](std::span<const double> x) {
    return weighted_sum(lhuc_apply(Matrix(pooled.rows(), pooled.cols(), {x.begin(), x.end()}), params), c);
  };
  rec.check("pooled", g.grad_pooled.data(), fd_gradient(fp, pooled.data(), opts.step), where);
  auto fr = [&](std::span<const double> x) {
    return weighted_sum(lhuc_apply(pooled, {{x.begin(), x.end()}}), c);
  };
  rec.check("r", g.grad_r, fd_gradient(fr, params.r, opts.step), where);
}

void check_model(std::size_t trial, Rng& rng, const GradcheckOptions& opts, Recorder& rec) {
  const bool gauss = trial % 2 == 1;
  const bool with_lhuc = (trial / 2) % 2 == 1;
  const std::size_t k = kPoolSizes[(trial / 4) % 3];
  const std::size_t width = 2 * k;
  const std::size_t hidden[] = {width};
  const auto configs = make_architecture(gauss ? "gauss" : "lp", 4, hidden, k, 4);
  Rng init_rng = rng.fork(trial);
  Model model = build_model(configs, init_rng);
  for (auto& p : model.mutable_params()) {
    for (double& b : p.biases) b = rng.uniform(-0.3, 0.3);
    for (double& r : p.rho) r = rng.uniform(1.2, 3.5);
    if (with_lhuc) {
      for (double& r : p.lhuc) r = rng.normal(0.0, 1.0);
    }
  }
  const std::size_t batch = 2;
  Matrix x = random_matrix(rng, batch, 4, -1.5, 1.5);
  // Stay clear of the Lp threshold and of Gauss ties.
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto fw = forward(model, x);
    const auto& pre = fw.trace.layers[0].pre;
    bool smooth = std::all_of(pre.data().begin(), pre.data().end(),
                              [](double v) { return std::abs(v) > 1e-2; });
    if (smooth) break;
    x = random_matrix(rng, batch, 4, -1.5, 1.5);
  }
  std::vector<int> targets{static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))};

  auto fw = forward(model, x);
  auto bw = backward(model, fw.trace, targets);
  std::ostringstream w;
  w << "op=model trial=" << trial << " pool=" << (gauss ? "gauss" : "lp") << " K=" << k
    << " lhuc=" << (with_lhuc ? "random" : "identity");

  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (ParamGroup g : kAllParamGroups) {
      if (!model.params(l).has(g)) continue;
      const Vector theta(model.params(l).group(g).begin(), model.params(l).group(g).end());
      auto f = [&](std::span<const double> v) {
        Model probe = model;
        auto dst = probe.mutable_params(l).group(g);
        std::copy(v.begin(), v.end(), dst.begin());
        auto pf = forward(probe, x);
        return backward(probe, pf.trace, targets).loss;
      };
      rec.check("model." + std::string(to_string(g)), bw.grads[l].group(g),
                fd_gradient(f, theta, opts.step), w.str() + " layer=" + std::to_string(l));
    }
  }
}

}  // namespace

std::string_view to_string(GradcheckOp op) {
  switch (op) {
    case GradcheckOp::lp: return "lp";
    case GradcheckOp::gauss: return "gauss";
    case GradcheckOp::lhuc: return "lhuc";
    case GradcheckOp::model: return "model";
  }
  return "?";
}

GradcheckOp parse_gradcheck_op(std::string_view name) {
  if (name == "lp") return GradcheckOp::lp;
  if (name == "gauss") return GradcheckOp::gauss;
  if (name == "lhuc") return GradcheckOp::lhuc;
  if (name == "model") return GradcheckOp::model;
  throw ConfigError("unknown gradcheck op '" + std::string(name) + "'");
}

GradcheckResult run_gradcheck(GradcheckOp op, const GradcheckOptions& opts) {
  GradcheckResult result;
  result.op = op;
  result.trials = opts.trials;
  Recorder rec(result, opts.tolerance);
  Rng root(opts.seed);
  for (std::size_t t = 0; t < opts.trials; ++t) {
    Rng rng = root.fork(t);
    switch (op) {
      case GradcheckOp::lp: check_lp(t, rng, opts, rec); break;
      case GradcheckOp::gauss: check_gauss(t, rng, opts, rec); break;
      case GradcheckOp::lhuc: check_lhuc(t, rng, opts, rec); break;
      case GradcheckOp::model: check_model(t, rng, opts, rec); break;
    }
  }
  return result;
}

}  // namespace diffpool
