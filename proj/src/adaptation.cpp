#include "diffpool/adaptation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "diffpool/errors.hpp"
#include "diffpool/text.hpp"

namespace diffpool {

std::string_view to_string(LabelSource s) {
  return s == LabelSource::oracle ? "oracle" : "self";
}

LabelSource parse_label_source(std::string_view s) {
  if (s == "self" || s == "self_first_pass") return LabelSource::self_first_pass;
  if (s == "oracle") return LabelSource::oracle;
  throw ConfigError("unknown label source '" + std::string(s) + "' (expected self or oracle)");
}

void AdaptConfig::validate(const Model& model) const {
  if (param_subset.empty()) throw ConfigError("adaptation subset is empty");
  const PoolType type = model.pool_type();
  if (type == PoolType::none) throw ConfigError("model has no pooling layers to adapt");
  for (ParamGroup g : param_subset) {
    switch (g) {
      case ParamGroup::rho:
        if (type != PoolType::lp) throw ConfigError("subset 'rho' needs an Lp model");
        break;
      case ParamGroup::mu:
      case ParamGroup::beta:
      case ParamGroup::eta:
        if (type != PoolType::gauss) {
          throw ConfigError("subset '" + std::string(to_string(g)) + "' needs a Gauss model");
        }
        break;
      case ParamGroup::biases:
      case ParamGroup::lhuc:
        break;
      case ParamGroup::weights:
        throw ConfigError("weights are not an adaptation parameter");
    }
  }
  if (bottom_layers && (*bottom_layers == 0 || *bottom_layers > model.pool_layers().size())) {
    throw ConfigError("bottom_layers must lie in [1, number of pooling layers]");
  }
  if (batch_size < 1) throw ConfigError("adaptation batch_size must be >= 1");
  if (repeats < 1) throw ConfigError("adaptation repeats must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("adaptation lr must be >= 0");
}

std::vector<std::size_t> adapted_layers(const Model& model, const AdaptConfig& cfg) {
  auto layers = model.pool_layers();
  if (cfg.bottom_layers) layers.resize(std::min(layers.size(), *cfg.bottom_layers));
  return layers;
}

std::vector<int> first_pass_labels(const Model& model, const Matrix& features) {
  return classify(model, features);
}

Model adapt_speaker(const Model& si, const LabelledSet& adapt_set, const AdaptConfig& cfg,
                    const IterationObserver& after_iteration) {
  cfg.validate(si);
  Model model = si;
  if (adapt_set.features.rows() == 0) return model;

  model.freeze_all();
  for (std::size_t l : adapted_layers(si, cfg)) {
    for (ParamGroup g : cfg.param_subset) model.set_frozen(l, g, false);
  }

  const std::vector<int> labels = cfg.label_source == LabelSource::self_first_pass
                                      ? first_pass_labels(si, adapt_set.features)
                                      : adapt_set.labels;
  if (labels.size() != adapt_set.features.rows()) {
    throw DimensionError("adapt_speaker: oracle labels do not match the adaptation features");
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> idx(order.data() + start, n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = labels[idx[i]];
      auto fw = forward(model, adapt_set.features.gather_rows(idx));
      auto bw = backward(model, fw.trace, y);
      sgd_step(model, bw.grads, cfg.lr, /*max_norm_limit=*/0.0);
    }
    if (after_iteration) after_iteration(it, model);
  }
  // Hand back the SI model's freeze state.
  model.unfreeze_all();
  for (std::size_t l = 0; l < si.num_layers(); ++l) {
    for (ParamGroup g : kAllParamGroups) model.set_frozen(l, g, si.frozen(l, g));
  }
  model.metadata().history.push_back({{"event", "adapt"},
                                      {"samples", labels.size()},
                                      {"labels", to_string(cfg.label_source)},
                                      {"lr", cfg.lr},
                                      {"iterations", cfg.iterations}});
  return model;
}

AdaptReport run_adaptation_experiment(const Model& si_model, const SpeakerDataset& data,
                                      const AdaptConfig& cfg, std::span<const std::size_t> sweep) {
  cfg.validate(si_model);
  if (sweep.empty()) throw ConfigError("adaptation sweep is empty");
  std::vector<std::size_t> budgets(sweep.begin(), sweep.end());

  std::vector<int> speakers = data.speakers(Split::test);
  for (int s : data.speakers(Split::adapt)) {
    if (!std::binary_search(speakers.begin(), speakers.end(), s)) {
      throw ConfigError("speaker " + std::to_string(s) + " has adaptation data but no test split");
    }
  }
  if (speakers.empty()) throw ConfigError("dataset has no test speakers");

  // The largest budget drives the per-speaker summary; 0 means "all".
  const std::size_t largest_idx = static_cast<std::size_t>(
      std::max_element(budgets.begin(), budgets.end(),
                       [](std::size_t a, std::size_t b) {
                         if (a == 0) return false;
                         if (b == 0) return true;
                         return a < b;
                       }) -
      budgets.begin());

  AdaptReport report;
  std::vector<std::vector<double>> before_by_budget(budgets.size());
  std::vector<std::vector<double>> after_by_budget(budgets.size());

  for (int speaker : speakers) {
    const LabelledSet adapt_all = data.select(Split::adapt, speaker);
    const LabelledSet test = data.select(Split::test, speaker);
    const double before = evaluate(si_model, test).frame_error;

    SpeakerResult sr;
    sr.speaker = speaker;
    sr.error_before = before;
    sr.iteration_errors.assign(cfg.iterations + 1, 0.0);

    for (std::size_t b = 0; b < budgets.size(); ++b) {
      std::size_t n = budgets[b] == 0 ? adapt_all.size() : std::min(budgets[b], adapt_all.size());
      if (cfg.sample_cap > 0) n = std::min(n, cfg.sample_cap);
      double after_sum = 0.0;
      for (std::size_t r = 0; r < cfg.repeats; ++r) {
        AdaptRun run;
        run.speaker = speaker;
        run.sweep_point = budgets[b];
        run.n_samples = n;
        run.repeat = r;
        run.seed = mix_seed(cfg.seed ^ mix_seed(static_cast<std::uint64_t>(speaker) * 1000003ULL +
                                                budgets[b] * 7919ULL + r));
        Rng rng(run.seed);
        std::vector<std::size_t> idx(adapt_all.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        LabelledSet subset;
        subset.features = adapt_all.features.gather_rows(idx);
        for (std::size_t i : idx) subset.labels.push_back(adapt_all.labels[i]);

        AdaptConfig run_cfg = cfg;
        run_cfg.seed = rng.next_u64();
        run.errors.push_back(before);
        Model adapted = adapt_speaker(si_model, subset, run_cfg, [&](std::size_t, const Model& m) {
          run.errors.push_back(evaluate(m, test).frame_error);
        });
        // Empty adaptation sets return the SI model without iterating.
        run.errors.resize(cfg.iterations + 1, before);
        after_sum += run.errors.back();
        if (b == largest_idx) {
          for (std::size_t i = 0; i < run.errors.size(); ++i) {
            sr.iteration_errors[i] += run.errors[i] / static_cast<double>(cfg.repeats);
          }
          if (r == 0) report.adapted_models.push_back(std::move(adapted));
        }
        report.runs.push_back(std::move(run));
      }
      const double after = after_sum / static_cast<double>(cfg.repeats);
      before_by_budget[b].push_back(before);
      after_by_budget[b].push_back(after);
      if (b == largest_idx) {
        sr.error_after = after;
        sr.n_adapt_samples = n;
      }
    }
    report.speakers.push_back(std::move(sr));
  }

  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    SweepSummary s;
    s.sweep_point = budgets[b];
    s.seconds_equivalent =
        budgets[b] == 0 ? 0.0 : static_cast<double>(budgets[b]) / cfg.frames_per_second;
    s.mean_error_before = mean(before_by_budget[b]);
    s.mean_error_after = mean(after_by_budget[b]);
    report.sweep.push_back(s);
  }
  report.mean_error_before = report.sweep[largest_idx].mean_error_before;
  report.mean_error_after = report.sweep[largest_idx].mean_error_after;

  for (const auto& param : inspected_params(si_model)) {
    for (std::size_t layer : si_model.pool_layers()) {
      LayerDispersion d;
      d.layer = layer;
      d.param = param;
      d.stddev_before = stddev(pool_param_values(si_model, layer, param));
      for (const auto& m : report.adapted_models) {
        d.stddev_after += stddev(pool_param_values(m, layer, param)) /
                          static_cast<double>(report.adapted_models.size());
      }
      report.dispersion.push_back(d);
    }
  }
  report.histograms = parameter_histograms(si_model, report.adapted_models);
  return report;
}

std::string adapt_report_csv(const AdaptReport& report) {
  std::ostringstream out;
  out << "speaker,sweep_point,seed,iteration,error\n";
  for (const auto& run : report.runs) {
    for (std::size_t i = 0; i < run.errors.size(); ++i) {
      out << run.speaker << ',' << run.sweep_point << ',' << run.seed << ',' << i << ','
          << format_double(run.errors[i]) << '\n';
    }
  }
  return out.str();
}

nlohmann::json adapt_report_summary(const AdaptReport& report, const AdaptConfig& cfg) {
  using nlohmann::json;
  json subset = json::array();
  for (ParamGroup g : cfg.param_subset) subset.push_back(to_string(g));
  json speakers = json::array();
  for (const auto& s : report.speakers) {
    speakers.push_back({{"speaker", s.speaker},
                        {"n_adapt_samples", s.n_adapt_samples},
                        {"error_before", s.error_before},
                        {"error_after", s.error_after},
                        {"iteration_errors", s.iteration_errors}});
  }
  json sweep = json::array();
  for (const auto& s : report.sweep) {
    sweep.push_back({{"sweep_point", s.sweep_point},
                     {"seconds_equivalent", s.seconds_equivalent},
                     {"mean_error_before", s.mean_error_before},
                     {"mean_error_after", s.mean_error_after}});
  }
  json dispersion = json::array();
  for (const auto& d : report.dispersion) {
    dispersion.push_back({{"layer", d.layer},
                          {"param", d.param},
                          {"stddev_before", d.stddev_before},
                          {"stddev_after", d.stddev_after}});
  }
  return {{"subset", subset},
          {"labels", to_string(cfg.label_source)},
          {"lr", cfg.lr},
          {"iterations", cfg.iterations},
          {"mean_error_before", report.mean_error_before},
          {"mean_error_after", report.mean_error_after},
          {"speakers", speakers},
          {"sweep", sweep},
          {"dispersion", dispersion}};
}

}  // namespace diffpool
