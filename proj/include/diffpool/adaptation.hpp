#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffpool/datagen.hpp"
#include "diffpool/inspect.hpp"
#include "diffpool/network.hpp"
#include "diffpool/training.hpp"

namespace diffpool {

enum class LabelSource { self_first_pass, oracle };

std::string_view to_string(LabelSource s);
LabelSource parse_label_source(std::string_view s);  // "self" | "oracle"

struct AdaptConfig {
  std::vector<ParamGroup> param_subset{ParamGroup::rho};
  LabelSource label_source = LabelSource::self_first_pass;
  double lr = 0.8;
  std::size_t iterations = 3;
  // Adapt only the lowest k pooling layers; unset adapts all of them.
  std::optional<std::size_t> bottom_layers;
  std::size_t batch_size = 256;
  // Upper bound on adaptation samples per speaker; 0 means no cap.
  std::size_t sample_cap = 0;
  std::size_t repeats = 3;  // independent subsamples per sweep point
  double frames_per_second = 100.0;
  std::uint64_t seed = 1;

  /// Subset must be non-empty and legal for the model's pooling type:
  /// rho needs Lp layers, mu/beta/eta need Gauss layers; biases and lhuc
  /// apply to either. Throws ConfigError otherwise.
  void validate(const Model& model) const;
};

/// Pooling layers selected by cfg.bottom_layers.
std::vector<std::size_t> adapted_layers(const Model& model, const AdaptConfig& cfg);

/// argmax of the model's posteriors, one per row.
std::vector<int> first_pass_labels(const Model& model, const Matrix& features);

using IterationObserver = std::function<void(std::size_t iteration, const Model&)>;

/// Copy of `si` where only cfg.param_subset in the selected pooling layers
/// is updated: cfg.iterations shuffled passes of plain SGD at cfg.lr, no
/// max-norm. With self labels the labels in `adapt_set` are never read.
/// `after_iteration` is called after every pass (1-based).
Model adapt_speaker(const Model& si, const LabelledSet& adapt_set, const AdaptConfig& cfg,
                    const IterationObserver& after_iteration = {});

struct AdaptRun {
  int speaker = 0;
  std::size_t sweep_point = 0;  // requested budget (0 = all)
  std::size_t n_samples = 0;    // actually used
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::vector<double> errors;  // errors[0] unadapted, errors[i] after iteration i
};

struct SpeakerResult {
  int speaker = 0;
  std::size_t n_adapt_samples = 0;
  double error_before = 0.0;
  double error_after = 0.0;              // mean over repeats at the largest budget
  std::vector<double> iteration_errors;  // same averaging, per iteration
};

struct SweepSummary {
  std::size_t sweep_point = 0;
  double seconds_equivalent = 0.0;
  double mean_error_before = 0.0;
  double mean_error_after = 0.0;
};

struct LayerDispersion {
  std::size_t layer = 0;
  std::string param;
  double stddev_before = 0.0;
  double stddev_after = 0.0;  // mean over adapted speaker models
};

struct AdaptReport {
  std::vector<AdaptRun> runs;
  std::vector<SpeakerResult> speakers;
  std::vector<SweepSummary> sweep;
  double mean_error_before = 0.0;
  double mean_error_after = 0.0;  // at the largest budget
  std::vector<LayerDispersion> dispersion;
  std::vector<ParamHistogram> histograms;
  // One adapted model per speaker: largest budget, first repeat.
  std::vector<Model> adapted_models;
};

/// Adapts the SI model to every speaker that has a test split, for every
/// budget in `sweep` (sample counts; 0 = all adaptation data) and cfg.repeats
/// seeded subsamples each, and scores each adapted copy on that speaker's test
/// split. Throws ConfigError if a speaker with adaptation data has no test data.
AdaptReport run_adaptation_experiment(const Model& si_model, const SpeakerDataset& data,
                                      const AdaptConfig& cfg, std::span<const std::size_t> sweep);

/// Rows "speaker,sweep_point,seed,iteration,error".
std::string adapt_report_csv(const AdaptReport& report);
nlohmann::json adapt_report_summary(const AdaptReport& report, const AdaptConfig& cfg);

}  // namespace diffpool
