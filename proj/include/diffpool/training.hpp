#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diffpool/network.hpp"

namespace diffpool {

struct LabelledSet {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Relative-improvement thresholds of the newbob schedule.
struct NewbobConfig {
  double ramp_threshold = 0.005;  // start halving below 0.5% relative improvement
  double stop_threshold = 0.001;  // stop below 0.1% once halving
  double halving_factor = 0.5;
};

enum class LrAction { keep, halve, stop };

std::string_view to_string(LrAction action);

/// Decision after the most recent epoch. `valid_errors` holds the validation
/// error before training followed by one entry per completed epoch, so it must
/// have at least two entries. Pure function of the sequence.
LrAction newbob_schedule(std::span<const double> valid_errors, const NewbobConfig& cfg = {});

struct TrainConfig {
  double initial_lr = 0.008;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  NewbobConfig newbob;
  double max_norm_limit = 1.0;  // <= 0 or inf disables the constraint
  double momentum = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double valid_error = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  double initial_valid_error = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;

  bool operator==(const TrainReport&) const = default;
};

/// θ ← θ − lr·g for every unfrozen group, then rescales unfrozen affine
/// weight columns whose L2 norm exceeds `max_norm_limit`. With `velocity`
/// (same shape as the gradients) classical momentum is applied instead.
/// Throws NumericalError on a non-finite gradient.
void sgd_step(Model& model, const Gradients& grads, double lr, double max_norm_limit,
              Gradients* velocity = nullptr, double momentum = 0.0);

/// Scale every unfrozen weight column down to at most `limit` in L2 norm.
void apply_max_norm(Model& model, double limit);

/// Largest L2 norm over all affine weight columns of the model.
double max_column_norm(const Model& model);

struct EvalResult {
  double frame_error = 0.0;
  double mean_loss = 0.0;
};

EvalResult evaluate(const Model& model, const LabelledSet& data);

/// argmax class per row.
std::vector<int> classify(const Model& model, const Matrix& features);

struct TrainResult {
  Model model;  // best validation epoch
  TrainReport report;
};

using UpdateObserver = std::function<void(const Model&)>;

/// Minibatch SGD with max-norm and newbob. Shuffling is driven by cfg.seed.
/// `on_update`, if set, sees the model after every parameter update.
TrainResult train(Model model, const LabelledSet& train_set, const LabelledSet& valid_set,
                  const TrainConfig& cfg, const UpdateObserver& on_update = {});

/// CSV with header "epoch,lr,train_loss,valid_error".
std::string train_report_csv(const TrainReport& report);

}  // namespace diffpool
