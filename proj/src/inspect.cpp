#include "diffpool/inspect.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "diffpool/errors.hpp"
#include "diffpool/text.hpp"

namespace diffpool {

std::vector<std::string> inspected_params(const Model& model) {
  switch (model.pool_type()) {
    case PoolType::lp: return {"p"};
    case PoolType::gauss: return {"mu", "beta"};
    case PoolType::none: return {};
  }
  return {};
}

std::vector<double> pool_param_values(const Model& model, std::size_t layer,
                                      const std::string& param) {
  const auto& p = model.params(layer);
  if (param == "p") {
    std::vector<double> out;
    for (double r : p.rho) out.push_back(effective_order(r));
    return out;
  }
  if (param == "mu") return p.mu;
  if (param == "beta") return p.beta;
  throw ConfigError("unknown pooling parameter '" + param + "'");
}

double stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

std::vector<ParamHistogram> parameter_histograms(const Model& before,
                                                 std::span<const Model> after,
                                                 std::size_t bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  for (const auto& m : after) {
    if (m.configs() != before.configs()) {
      throw ConfigError("cannot compare models with different architectures");
    }
  }
  std::vector<ParamHistogram> out;
  for (const auto& param : inspected_params(before)) {
    for (std::size_t layer : before.pool_layers()) {
      ParamHistogram h;
      h.layer = layer;
      h.param = param;
      const auto vb = pool_param_values(before, layer, param);
      std::vector<std::vector<double>> va;
      for (const auto& m : after) va.push_back(pool_param_values(m, layer, param));

      double lo = *std::min_element(vb.begin(), vb.end());
      double hi = *std::max_element(vb.begin(), vb.end());
      for (const auto& v : va) {
        lo = std::min(lo, *std::min_element(v.begin(), v.end()));
        hi = std::max(hi, *std::max_element(v.begin(), v.end()));
      }
      if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
      }
      h.edges.resize(bins + 1);
      for (std::size_t b = 0; b <= bins; ++b) {
        h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
      }
      auto bin_of = [&](double x) {
        const auto b = static_cast<std::ptrdiff_t>(std::floor((x - lo) / (hi - lo) *
                                                              static_cast<double>(bins)));
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, bins - 1));
      };
      h.before.assign(bins, 0.0);
      h.after.assign(bins, 0.0);
      for (double x : vb) h.before[bin_of(x)] += 1.0;
      for (const auto& v : va) {
        for (double x : v) h.after[bin_of(x)] += 1.0 / static_cast<double>(va.size());
      }
      out.push_back(std::move(h));
    }
  }
  return out;
}

std::string histogram_csv(std::span<const ParamHistogram> hists, const std::string& param) {
  std::ostringstream out;
  out << "layer,bin_low,bin_high,count_before,count_after\n";
  for (const auto& h : hists) {
    if (h.param != param) continue;
    for (std::size_t b = 0; b < h.before.size(); ++b) {
      out << h.layer << ',' << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1])
          << ',' << format_double(h.before[b]) << ',' << format_double(h.after[b]) << '\n';
    }
  }
  return out.str();
}

}  // namespace diffpool
