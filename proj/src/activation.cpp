#include "diffpool/activation.hpp"

#include <algorithm>
#include <cmath>

#include "diffpool/errors.hpp"

namespace diffpool {

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::relu: return "relu";
    case ActivationKind::softmax: return "softmax";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "sigmoid") return ActivationKind::sigmoid;
  if (name == "tanh") return ActivationKind::tanh;
  if (name == "relu") return ActivationKind::relu;
  if (name == "softmax") return ActivationKind::softmax;
  if (name == "identity") return ActivationKind::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double sigmoid(double x) {
  // Branching keeps exp() from overflowing on either tail.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix activation_forward(const Matrix& a, ActivationKind kind) {
  Matrix out(a.rows(), a.cols());
  auto& o = out.data();
  const auto& in = a.data();
  switch (kind) {
    case ActivationKind::sigmoid:
      std::transform(in.begin(), in.end(), o.begin(), sigmoid);
      break;
    case ActivationKind::tanh:
      std::transform(in.begin(), in.end(), o.begin(), [](double x) { return std::tanh(x); });
      break;
    case ActivationKind::relu:
      std::transform(in.begin(), in.end(), o.begin(), [](double x) { return x > 0.0 ? x : 0.0; });
      break;
    case ActivationKind::identity:
      o = in;
      break;
    case ActivationKind::softmax:
      for (std::size_t n = 0; n < a.rows(); ++n) {
        auto r = a.row(n);
        auto dst = out.row(n);
        const double mx = *std::max_element(r.begin(), r.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) {
          dst[j] = std::exp(r[j] - mx);
          sum += dst[j];
        }
        for (double& v : dst) v /= sum;
      }
      break;
  }
  return out;
}

Matrix activation_backward(const Matrix& out, const Matrix& grad_out, ActivationKind kind) {
  if (out.rows() != grad_out.rows() || out.cols() != grad_out.cols()) {
    throw DimensionError("activation_backward: shape mismatch");
  }
  Matrix g(out.rows(), out.cols());
  const auto& y = out.data();
  const auto& go = grad_out.data();
  auto& gd = g.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (kind) {
      case ActivationKind::sigmoid: gd[i] = go[i] * y[i] * (1.0 - y[i]); break;
      case ActivationKind::tanh: gd[i] = go[i] * (1.0 - y[i] * y[i]); break;
      case ActivationKind::relu: gd[i] = y[i] > 0.0 ? go[i] : 0.0; break;
      case ActivationKind::identity: gd[i] = go[i]; break;
      case ActivationKind::softmax:
        throw ContractViolation("softmax gradient is fused with cross_entropy");
    }
  }
  return g;
}

}  // namespace diffpool
