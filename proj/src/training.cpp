#include "diffpool/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "diffpool/errors.hpp"
#include "diffpool/loss.hpp"
#include "diffpool/text.hpp"

namespace diffpool {
namespace {

constexpr std::size_t kEvalChunk = 2048;

double relative_improvement(double prev, double cur) {
  if (prev <= 0.0) return 0.0;
  return (prev - cur) / prev;
}

void check_set(const LabelledSet& s, const Model& model, const char* what) {
  if (s.size() == 0) throw ConfigError(std::string(what) + " set is empty");
  if (s.features.rows() != s.labels.size()) {
    throw DimensionError(std::string(what) + " set: feature rows and label count differ");
  }
  if (s.features.cols() != model.input_dim()) {
    throw DimensionError(std::string(what) + " set: feature width does not match the model input");
  }
  for (int y : s.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes()) {
      throw ConfigError(std::string(what) + " set: label " + std::to_string(y) +
                        " outside the model's " + std::to_string(model.num_classes()) +
                        " classes");
    }
  }
}

}  // namespace

std::string_view to_string(LrAction action) {
  switch (action) {
    case LrAction::keep: return "keep";
    case LrAction::halve: return "halve";
    case LrAction::stop: return "stop";
  }
  return "?";
}

LrAction newbob_schedule(std::span<const double> valid_errors, const NewbobConfig& cfg) {
  if (valid_errors.size() < 2) throw ContractViolation("newbob_schedule: needs one completed epoch");
  bool halving = false;
  LrAction action = LrAction::keep;
  for (std::size_t i = 1; i < valid_errors.size(); ++i) {
    const double imp = relative_improvement(valid_errors[i - 1], valid_errors[i]);
    if (halving) {
      action = imp < cfg.stop_threshold ? LrAction::stop : LrAction::halve;
    } else if (imp < cfg.ramp_threshold) {
      halving = true;
      action = LrAction::halve;
    } else {
      action = LrAction::keep;
    }
    if (action == LrAction::stop) break;
  }
  return action;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (newbob.ramp_threshold < 0.0 || newbob.stop_threshold < 0.0) {
    throw ConfigError("newbob thresholds must be >= 0");
  }
  if (!(initial_lr >= 0.0)) throw ConfigError("initial_lr must be >= 0");
}

void apply_max_norm(Model& model, double limit) {
  if (!(limit > 0.0) || std::isinf(limit)) return;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (model.frozen(l, ParamGroup::weights)) continue;
    const Matrix& w = model.params(l).weights;
    std::vector<double> norms(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) norms[j] += w(i, j) * w(i, j);
    }
    bool any = false;
    for (double& n : norms) {
      n = std::sqrt(n);
      any = any || n > limit;
    }
    if (!any) continue;
    Matrix& wm = model.mutable_params(l).weights;
    for (std::size_t j = 0; j < wm.cols(); ++j) {
      if (norms[j] <= limit) continue;
      const double s = limit / norms[j];
      for (std::size_t i = 0; i < wm.rows(); ++i) wm(i, j) *= s;
    }
  }
}

double max_column_norm(const Model& model) {
  double worst = 0.0;
  for (const auto& p : model.params()) {
    const Matrix& w = p.weights;
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, j) * w(i, j);
      worst = std::max(worst, std::sqrt(s));
    }
  }
  return worst;
}

void sgd_step(Model& model, const Gradients& grads, double lr, double max_norm_limit,
              Gradients* velocity, double momentum) {
  if (grads.size() != model.num_layers()) throw DimensionError("sgd_step: gradient layer count");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    for (ParamGroup g : kAllParamGroups) {
      if (grads[l].group(g).size() != model.params(l).group(g).size()) {
        throw DimensionError("sgd_step: gradient shape mismatch in layer " + std::to_string(l) +
                             " group " + std::string(to_string(g)));
      }
      if (!all_finite(grads[l].group(g))) {
        throw NumericalError("non-finite gradient in layer " + std::to_string(l) + " group '" +
                             std::string(to_string(g)) + "'");
      }
    }
  }
  auto& params = model.mutable_params();
  for (std::size_t l = 0; l < params.size(); ++l) {
    for (ParamGroup g : kAllParamGroups) {
      if (model.frozen(l, g)) continue;
      auto theta = params[l].group(g);
      auto grad = grads[l].group(g);
      if (velocity != nullptr) {
        auto vel = (*velocity)[l].group(g);
        for (std::size_t i = 0; i < theta.size(); ++i) {
          vel[i] = momentum * vel[i] - lr * grad[i];
          theta[i] += vel[i];
        }
      } else {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
      }
    }
  }
  apply_max_norm(model, max_norm_limit);
}

std::vector<int> classify(const Model& model, const Matrix& features) {
  std::vector<int> out;
  out.reserve(features.rows());
  for (std::size_t start = 0; start < features.rows(); start += kEvalChunk) {
    std::vector<std::size_t> idx(std::min(kEvalChunk, features.rows() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Matrix probs = predict(model, features.gather_rows(idx));
    for (std::size_t n = 0; n < probs.rows(); ++n) {
      auto row = probs.row(n);
      out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

EvalResult evaluate(const Model& model, const LabelledSet& data) {
  EvalResult r;
  if (data.size() == 0) return r;
  std::size_t wrong = 0;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    std::vector<std::size_t> idx(std::min(kEvalChunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Matrix probs = predict(model, data.features.gather_rows(idx));
    std::span<const int> labels(data.labels.data() + start, idx.size());
    loss_sum += cross_entropy(probs, labels).loss * static_cast<double>(idx.size());
    for (std::size_t n = 0; n < probs.rows(); ++n) {
      auto row = probs.row(n);
      const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
      if (pred != labels[n]) ++wrong;
    }
  }
  r.frame_error = static_cast<double>(wrong) / static_cast<double>(data.size());
  r.mean_loss = loss_sum / static_cast<double>(data.size());
  return r;
}

TrainResult train(Model model, const LabelledSet& train_set, const LabelledSet& valid_set,
                  const TrainConfig& cfg, const UpdateObserver& on_update) {
  cfg.validate();
  check_set(train_set, model, "training");
  check_set(valid_set, model, "validation");

  Rng rng(cfg.seed);
  TrainResult result;
  TrainReport& report = result.report;
  report.initial_valid_error = evaluate(model, valid_set).frame_error;
  std::vector<double> history{report.initial_valid_error};

  Gradients velocity;
  if (cfg.momentum != 0.0) {
    for (const auto& p : model.params()) velocity.push_back(p.zeros_like());
  }

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = cfg.initial_lr;
  std::optional<Model> best;
  double best_error = INFINITY;
  report.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> idx(order.data() + start, n);
      const Matrix x = train_set.features.gather_rows(idx);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = train_set.labels[idx[i]];

      auto fw = forward(model, x);
      auto bw = backward(model, fw.trace, y);
      if (!std::isfinite(bw.loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", sample offset " + std::to_string(start));
      }
      loss_sum += bw.loss * static_cast<double>(n);
      sgd_step(model, bw.grads, lr, cfg.max_norm_limit, velocity.empty() ? nullptr : &velocity,
               cfg.momentum);
      if (on_update) on_update(model);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.valid_error = evaluate(model, valid_set).frame_error;
    report.epochs.push_back(rec);
    if (rec.valid_error < best_error) {
      best_error = rec.valid_error;
      best = model;
      report.best_epoch = epoch;
    }
    history.push_back(rec.valid_error);

    const LrAction action = newbob_schedule(history, cfg.newbob);
    if (action == LrAction::stop) {
      report.stop_reason = "newbob";
      break;
    }
    if (action == LrAction::halve) lr *= cfg.newbob.halving_factor;
  }

  result.model = best ? std::move(*best) : std::move(model);
  result.model.metadata().history.push_back(
      {{"event", "train"},
       {"epochs", report.epochs.size()},
       {"best_epoch", report.best_epoch},
       {"stop_reason", report.stop_reason},
       {"seed", cfg.seed}});
  return result;
}

std::string train_report_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,lr,train_loss,valid_error\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.train_loss) << ','
        << format_double(e.valid_error) << '\n';
  }
  return out.str();
}

}  // namespace diffpool
