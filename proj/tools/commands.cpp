#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "diffpool/adaptation.hpp"
#include "diffpool/datagen.hpp"
#include "diffpool/errors.hpp"
#include "diffpool/gradcheck.hpp"
#include "diffpool/inspect.hpp"
#include "diffpool/model_io.hpp"
#include "diffpool/network.hpp"
#include "diffpool/text.hpp"
#include "diffpool/training.hpp"

namespace diffpool::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every key in `patch` must already exist in `base`; objects recurse.
void check_known_keys(const json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) return;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!base.contains(it.key())) {
      throw ConfigError("unknown config key '" + path + it.key() + "'");
    }
    if (base.at(it.key()).is_object()) check_known_keys(base.at(it.key()), it.value(), path + it.key() + ".");
  }
}

json load_config(const std::string& file) {
  json cfg = default_run_config();
  if (file.empty()) return cfg;
  json patch;
  try {
    patch = json::parse(read_text(file));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + file + ": " + e.what());
  }
  if (!patch.is_object()) throw ConfigError("config file " + file + " must hold a JSON object");
  check_known_keys(cfg, patch, "");
  cfg.merge_patch(patch);
  return cfg;
}

template <typename T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + section + "." + key + "' is missing or has the wrong type");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : split(s, ',')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

/// Subfolder named by a hash of the resolved configuration.
fs::path content_dir(const fs::path& root, const json& resolved) {
  return root / to_hex(fnv1a64(resolved.dump()));
}

fs::path prepare_output(const fs::path& root, const json& resolved) {
  const fs::path dir = content_dir(root, resolved);
  fs::create_directories(dir);
  write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");
  return dir;
}

MultispeakerSpec multispeaker_from_json(const json& j) {
  const std::string s = "data.multispeaker";
  MultispeakerSpec spec;
  spec.n_speakers_train = get<std::size_t>(j, "n_speakers_train", s);
  spec.n_speakers_test = get<std::size_t>(j, "n_speakers_test", s);
  spec.n_per_speaker = get<std::size_t>(j, "n_per_speaker", s);
  spec.dim = get<std::size_t>(j, "dim", s);
  spec.n_classes = get<std::size_t>(j, "n_classes", s);
  spec.class_separation = get<double>(j, "class_separation", s);
  spec.noise = get<double>(j, "noise", s);
  spec.adapt_fraction = get<double>(j, "adapt_fraction", s);
  const json& sh = j.at("shift");
  spec.shift.magnitude = get<double>(sh, "magnitude", s + ".shift");
  spec.shift.train_ratio = get<double>(sh, "train_ratio", s + ".shift");
  spec.shift.log_scale_std = get<double>(sh, "log_scale_std", s + ".shift");
  spec.shift.rotation_std = get<double>(sh, "rotation_std", s + ".shift");
  spec.shift.offset_std = get<double>(sh, "offset_std", s + ".shift");
  spec.shift.class_jitter = get<double>(sh, "class_jitter", s + ".shift");
  return spec;
}

TrainConfig train_from_json(const json& j, std::uint64_t seed) {
  const std::string s = "train";
  TrainConfig cfg;
  cfg.initial_lr = get<double>(j, "initial_lr", s);
  cfg.batch_size = get<std::size_t>(j, "batch_size", s);
  cfg.max_epochs = get<std::size_t>(j, "max_epochs", s);
  cfg.newbob.ramp_threshold = get<double>(j, "ramp_threshold", s);
  cfg.newbob.stop_threshold = get<double>(j, "stop_threshold", s);
  cfg.newbob.halving_factor = get<double>(j, "halving_factor", s);
  cfg.max_norm_limit = get<double>(j, "max_norm", s);
  cfg.momentum = get<double>(j, "momentum", s);
  cfg.seed = seed;
  return cfg;
}

AdaptConfig adapt_from_json(const json& j, std::uint64_t seed) {
  const std::string s = "adapt";
  AdaptConfig cfg;
  cfg.param_subset.clear();
  for (const auto& name : get<std::vector<std::string>>(j, "subset", s)) {
    cfg.param_subset.push_back(parse_param_group(name));
  }
  cfg.label_source = parse_label_source(get<std::string>(j, "labels", s));
  cfg.lr = get<double>(j, "lr", s);
  cfg.iterations = get<std::size_t>(j, "iterations", s);
  const auto bottom = get<std::size_t>(j, "bottom_layers", s);
  if (bottom > 0) cfg.bottom_layers = bottom;
  cfg.batch_size = get<std::size_t>(j, "batch_size", s);
  cfg.sample_cap = get<std::size_t>(j, "sample_cap", s);
  cfg.repeats = get<std::size_t>(j, "repeats", s);
  cfg.frames_per_second = get<double>(j, "frames_per_second", s);
  cfg.seed = seed;
  return cfg;
}

InitSpec init_from_json(const json& j) {
  const std::string s = "model.init";
  InitSpec init;
  init.rho = get<double>(j, "rho", s);
  init.mu_mean = get<double>(j, "mu_mean", s);
  init.mu_stddev = get<double>(j, "mu_stddev", s);
  init.beta_mean = get<double>(j, "beta_mean", s);
  init.beta_stddev = get<double>(j, "beta_stddev", s);
  init.eta = get<double>(j, "eta", s);
  return init;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string config, out, task;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_per_class, n_per_speaker, dim, classes;
  std::optional<double> noise, magnitude;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  json cfg = load_config(a.config);
  if (a.seed) cfg["seed"] = *a.seed;
  if (!a.task.empty()) cfg["data"]["task"] = a.task;
  json& cr = cfg["data"]["closed_region"];
  json& ms = cfg["data"]["multispeaker"];
  if (a.n_per_class) cr["n_per_class"] = *a.n_per_class;
  if (a.noise) {
    cr["noise"] = *a.noise;
    ms["noise"] = *a.noise;
  }
  if (a.magnitude) ms["shift"]["magnitude"] = *a.magnitude;
  if (a.n_per_speaker) ms["n_per_speaker"] = *a.n_per_speaker;
  if (a.dim) ms["dim"] = *a.dim;
  if (a.classes) ms["n_classes"] = *a.classes;

  const fs::path dir(a.out);
  if (fs::exists(dir) && !fs::is_empty(dir) && !a.force) {
    throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
  }

  const auto seed = get<std::uint64_t>(cfg, "seed", "");
  const auto task = get<std::string>(cfg["data"], "task", "data");
  json resolved = {{"command", "gen-data"}, {"seed", seed}, {"task", task}};
  SpeakerDataset ds;
  if (task == "closed-region") {
    ds = gen_closed_region(get<std::size_t>(cr, "n_per_class", "data.closed_region"),
                           get<double>(cr, "noise", "data.closed_region"), seed);
    resolved["closed_region"] = cr;
  } else if (task == "multispeaker") {
    ds = gen_multispeaker(multispeaker_from_json(ms), seed);
    resolved["multispeaker"] = ms;
  } else {
    throw ConfigError("unknown task '" + task + "' (expected closed-region or multispeaker)");
  }
  save_dataset(ds, dir);
  write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");

  const std::string csv = dataset_csv(ds);
  out << "generator: " << ds.manifest.generator << "\n"
      << "rows: " << ds.manifest.n_rows << "\n"
      << "dim: " << ds.manifest.dim << "\n"
      << "classes: " << ds.manifest.n_classes << "\n"
      << "seed: " << ds.manifest.seed << "\n"
      << "train/adapt/test rows: " << ds.select(Split::train).size() << "/"
      << ds.select(Split::adapt).size() << "/" << ds.select(Split::test).size() << "\n"
      << "csv_fnv1a64: " << to_hex(fnv1a64(csv)) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, model_type, data, out, hidden;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, valid_fraction;
  std::optional<std::size_t> epochs, batch_size, pool_size;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  json cfg = load_config(a.config);
  if (a.seed) cfg["seed"] = *a.seed;
  if (!a.model_type.empty()) cfg["model"]["type"] = a.model_type;
  if (!a.hidden.empty()) {
    json widths = json::array();
    for (const auto& w : split_list(a.hidden)) widths.push_back(std::stoul(w));
    cfg["model"]["hidden"] = widths;
  }
  if (a.pool_size) cfg["model"]["pool_size"] = *a.pool_size;
  if (a.lr) cfg["train"]["initial_lr"] = *a.lr;
  if (a.epochs) cfg["train"]["max_epochs"] = *a.epochs;
  if (a.batch_size) cfg["train"]["batch_size"] = *a.batch_size;
  if (a.valid_fraction) cfg["train"]["valid_fraction"] = *a.valid_fraction;

  const SpeakerDataset ds = load_dataset(a.data);
  const auto seed = get<std::uint64_t>(cfg, "seed", "");
  const json& jm = cfg["model"];
  const auto type = get<std::string>(jm, "type", "model");
  const auto hidden = get<std::vector<std::size_t>>(jm, "hidden", "model");
  const auto pool_size = get<std::size_t>(jm, "pool_size", "model");
  const bool normalize = get<bool>(jm, "normalize", "model");
  const TrainConfig tcfg = train_from_json(cfg["train"], seed);
  const double valid_fraction = get<double>(cfg["train"], "valid_fraction", "train");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw ConfigError("train.valid_fraction must lie in [0,1)");
  }

  json resolved = {{"command", "train"},
                   {"seed", seed},
                   {"data", a.data},
                   {"data_manifest", manifest_to_json(ds.manifest)},
                   {"model", jm},
                   {"train", cfg["train"]}};

  // Validation rows are a seeded share of the training split.
  const LabelledSet all_train = ds.select(Split::train);
  if (all_train.size() == 0) throw ConfigError("dataset has no training rows");
  std::vector<std::size_t> order(all_train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = Rng(seed).fork(101);
  split_rng.shuffle(order);
  const auto n_valid = static_cast<std::size_t>(valid_fraction * static_cast<double>(order.size()));
  std::vector<std::size_t> valid_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(valid_idx.begin(), valid_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  auto take = [&](const std::vector<std::size_t>& idx) {
    LabelledSet s;
    s.features = all_train.features.gather_rows(idx);
    for (std::size_t i : idx) s.labels.push_back(all_train.labels[i]);
    return s;
  };
  const LabelledSet train_set = take(train_idx);
  const LabelledSet valid_set = n_valid > 0 ? take(valid_idx) : train_set;

  Rng init_rng = Rng(seed).fork(7);
  Model model = build_model(
      make_architecture(type, ds.manifest.dim, hidden, pool_size, ds.manifest.n_classes, normalize),
      init_rng, init_from_json(jm.at("init")));
  model.metadata().seed = seed;

  TrainResult result = train(std::move(model), train_set, valid_set, tcfg);

  const fs::path dir = prepare_output(a.out, resolved);
  save_model(result.model, dir / "model.json");
  write_text(dir / "train_report.csv", train_report_csv(result.report));
  json summary = {{"epochs", result.report.epochs.size()},
                  {"best_epoch", result.report.best_epoch},
                  {"stop_reason", result.report.stop_reason},
                  {"initial_valid_error", result.report.initial_valid_error},
                  {"train_error", evaluate(result.model, train_set).frame_error},
                  {"valid_error", evaluate(result.model, valid_set).frame_error}};
  const LabelledSet test = ds.select(Split::test);
  if (test.size() > 0) summary["test_error"] = evaluate(result.model, test).frame_error;
  write_text(dir / "train_summary.json", summary.dump(2) + "\n");

  out << "output: " << dir.string() << "\n" << summary.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AdaptArgs {
  std::string config, model, data, out, subset, labels, sweep;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::size_t> iters, bottom_layers, repeats, batch_size;
};

int cmd_adapt(const AdaptArgs& a, std::ostream& out) {
  json cfg = load_config(a.config);
  json& ja = cfg["adapt"];
  if (a.seed) cfg["seed"] = *a.seed;
  if (!a.subset.empty()) ja["subset"] = split_list(a.subset);
  if (!a.labels.empty()) ja["labels"] = a.labels;
  if (a.lr) ja["lr"] = *a.lr;
  if (a.iters) ja["iterations"] = *a.iters;
  if (a.bottom_layers) ja["bottom_layers"] = *a.bottom_layers;
  if (a.repeats) ja["repeats"] = *a.repeats;
  if (a.batch_size) ja["batch_size"] = *a.batch_size;
  if (!a.sweep.empty()) {
    json points = json::array();
    for (const auto& p : split_list(a.sweep)) points.push_back(p == "all" ? 0UL : std::stoul(p));
    ja["sweep"] = points;
  }

  const auto seed = get<std::uint64_t>(cfg, "seed", "");
  const AdaptConfig acfg = adapt_from_json(ja, seed);
  const auto sweep = get<std::vector<std::size_t>>(ja, "sweep", "adapt");
  const Model si = load_model(a.model);
  acfg.validate(si);
  const SpeakerDataset ds = load_dataset(a.data);

  json resolved = {{"command", "adapt"},
                   {"seed", seed},
                   {"model", a.model},
                   {"model_fnv1a64", to_hex(fnv1a64(read_text(a.model)))},
                   {"data", a.data},
                   {"data_manifest", manifest_to_json(ds.manifest)},
                   {"adapt", ja}};

  const AdaptReport report = run_adaptation_experiment(si, ds, acfg, sweep);
  const fs::path dir = prepare_output(a.out, resolved);
  write_text(dir / "adapt_report.csv", adapt_report_csv(report));
  const json summary = adapt_report_summary(report, acfg);
  write_text(dir / "adapt_summary.json", summary.dump(2) + "\n");
  for (const auto& param : inspected_params(si)) {
    write_text(dir / ("histogram_" + param + ".csv"), histogram_csv(report.histograms, param));
  }
  fs::create_directories(dir / "models");
  for (std::size_t i = 0; i < report.adapted_models.size(); ++i) {
    save_model(report.adapted_models[i],
               dir / "models" / ("speaker_" + std::to_string(report.speakers[i].speaker) + ".json"));
  }
  out << "output: " << dir.string() << "\n"
      << "mean_error_before: " << format_double(report.mean_error_before) << "\n"
      << "mean_error_after: " << format_double(report.mean_error_after) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(const std::string& op, std::size_t trials, std::uint64_t seed, std::ostream& out) {
  GradcheckOptions opts;
  opts.trials = trials;
  opts.seed = seed;
  const auto result = run_gradcheck(parse_gradcheck_op(op), opts);
  out << "op: " << op << "  trials: " << trials << "  seed: " << seed << "\n";
  for (const auto& [cls, err] : result.max_error) {
    out << "max_rel_error " << cls << " " << format_double(err) << "\n";
  }
  for (const auto& f : result.failures) out << "FAIL " << f << "\n";
  out << (result.passed() ? "PASS" : "FAIL") << " (tolerance " << opts.tolerance
      << ")\n";
  return result.passed() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& model_path, const std::string& after_path,
                const std::string& out_root, std::size_t bins, std::ostream& out) {
  const Model before = load_model(model_path);
  std::vector<Model> after;
  if (!after_path.empty()) after.push_back(load_model(after_path));
  const auto hists = parameter_histograms(before, after, bins);

  json resolved = {{"command", "inspect"},
                   {"model", model_path},
                   {"model_fnv1a64", to_hex(fnv1a64(read_text(model_path)))},
                   {"bins", bins}};
  if (!after_path.empty()) {
    resolved["model_after"] = after_path;
    resolved["model_after_fnv1a64"] = to_hex(fnv1a64(read_text(after_path)));
  }
  const fs::path dir = prepare_output(out_root, resolved);

  json dispersion = json::array();
  for (const auto& param : inspected_params(before)) {
    write_text(dir / ("histogram_" + param + ".csv"), histogram_csv(hists, param));
    for (std::size_t layer : before.pool_layers()) {
      const double sb = stddev(pool_param_values(before, layer, param));
      json row = {{"layer", layer}, {"param", param}, {"stddev_before", sb}};
      if (!after.empty()) {
        const double sa = stddev(pool_param_values(after.front(), layer, param));
        row["stddev_after"] = sa;
        row["stddev_delta"] = sa - sb;
      }
      dispersion.push_back(row);
    }
  }
  write_text(dir / "inspect_summary.json", json{{"dispersion", dispersion}}.dump(2) + "\n");
  out << "output: " << dir.string() << "\n" << dispersion.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

json default_run_config() {
  return {
      {"seed", 1},
      {"data",
       {{"task", "multispeaker"},
        {"closed_region", {{"n_per_class", 500}, {"noise", 0.0}}},
        {"multispeaker",
         {{"n_speakers_train", 8},
          {"n_speakers_test", 4},
          {"n_per_speaker", 2000},
          {"dim", 8},
          {"n_classes", 6},
          {"class_separation", 2.0},
          {"noise", 1.0},
          {"adapt_fraction", 0.5},
          {"shift",
           {{"magnitude", 0.7},
            {"train_ratio", 0.2},
            {"log_scale_std", 0.3},
            {"rotation_std", 0.5},
            {"offset_std", 0.5},
            {"class_jitter", 0.0}}}}}}},
      {"model",
       {{"type", "lp"},
        {"hidden", {100, 100}},
        {"pool_size", 5},
        {"normalize", false},
        {"init",
         {{"rho", 2.0},
          {"mu_mean", 0.0},
          {"mu_stddev", 1.0},
          {"beta_mean", 1.0},
          {"beta_stddev", 0.5},
          {"eta", 1.0}}}}},
      {"train",
       {{"initial_lr", 0.008},
        {"batch_size", 32},
        {"max_epochs", 20},
        {"ramp_threshold", 0.005},
        {"stop_threshold", 0.001},
        {"halving_factor", 0.5},
        {"max_norm", 1.0},
        {"momentum", 0.0},
        {"valid_fraction", 0.1}}},
      {"adapt",
       {{"subset", {"rho"}},
        {"labels", "self"},
        {"lr", 0.8},
        {"iterations", 3},
        {"bottom_layers", 0},
        {"batch_size", 256},
        {"sample_cap", 0},
        {"repeats", 3},
        {"sweep", {0}},
        {"frames_per_second", 100.0}}}};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable pooling networks: training, adaptation and gradient checks",
               "diffpool"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  c_gen->add_option("--task", gen.task, "closed-region | multispeaker (default from config)");
  c_gen->add_option("--seed", gen.seed, "Generator seed");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--config", gen.config, "Run configuration JSON");
  c_gen->add_option("--n-per-class", gen.n_per_class, "closed-region: samples per class");
  c_gen->add_option("--noise", gen.noise, "Feature noise stddev");
  c_gen->add_option("--magnitude", gen.magnitude, "multispeaker: shift magnitude");
  c_gen->add_option("--n-per-speaker", gen.n_per_speaker, "multispeaker: samples per speaker");
  c_gen->add_option("--dim", gen.dim, "multispeaker: feature dimension");
  c_gen->add_option("--classes", gen.classes, "multispeaker: number of classes");
  c_gen->add_flag("--force", gen.force, "Write into a non-empty directory");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a speaker-independent model");
  c_train->add_option("--model", tr.model_type, "dnn | lp | gauss");
  c_train->add_option("--config", tr.config, "Run configuration JSON");
  c_train->add_option("--data", tr.data, "Dataset directory")->required();
  c_train->add_option("--out", tr.out, "Output root")->required();
  c_train->add_option("--seed", tr.seed, "Seed for init, shuffling and validation split");
  c_train->add_option("--lr", tr.lr, "Initial learning rate");
  c_train->add_option("--epochs", tr.epochs, "Maximum epochs");
  c_train->add_option("--batch-size", tr.batch_size, "Minibatch size");
  c_train->add_option("--hidden", tr.hidden, "Comma-separated hidden layer widths");
  c_train->add_option("--pool-size", tr.pool_size, "Pool size K");
  c_train->add_option("--valid-fraction", tr.valid_fraction, "Share of train rows held out");

  AdaptArgs ad;
  auto* c_adapt = app.add_subcommand("adapt", "Adapt pooling parameters per test speaker");
  c_adapt->add_option("--model", ad.model, "Speaker-independent model file")->required();
  c_adapt->add_option("--data", ad.data, "Dataset directory")->required();
  c_adapt->add_option("--out", ad.out, "Output root")->required();
  c_adapt->add_option("--config", ad.config, "Run configuration JSON");
  c_adapt->add_option("--subset", ad.subset, "Comma-separated groups: rho,bias,lhuc,mu,beta,eta");
  c_adapt->add_option("--labels", ad.labels, "self | oracle");
  c_adapt->add_option("--lr", ad.lr, "Adaptation learning rate");
  c_adapt->add_option("--iters", ad.iters, "Adaptation passes");
  c_adapt->add_option("--bottom-layers", ad.bottom_layers, "Adapt only the lowest k pooling layers");
  c_adapt->add_option("--repeats", ad.repeats, "Subsample repeats per budget");
  c_adapt->add_option("--batch-size", ad.batch_size, "Minibatch size");
  c_adapt->add_option("--sweep", ad.sweep, "Comma-separated sample budgets ('all' or 0 = everything)");
  c_adapt->add_option("--seed", ad.seed, "Seed for subsampling and shuffling");

  std::string gc_op;
  std::size_t gc_trials = 200;
  std::uint64_t gc_seed = 1;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  c_grad->add_option("--op", gc_op, "lp | gauss | lhuc | model")->required();
  c_grad->add_option("--trials", gc_trials, "Number of random configurations");
  c_grad->add_option("--seed", gc_seed, "Seed");

  std::string in_model, in_after, in_out;
  std::size_t in_bins = 20;
  auto* c_inspect = app.add_subcommand("inspect", "Histograms of learned pooling parameters");
  c_inspect->add_option("--model", in_model, "Model file")->required();
  c_inspect->add_option("--model-after", in_after, "Adapted model to compare against");
  c_inspect->add_option("--out", in_out, "Output root")->required();
  c_inspect->add_option("--bins", in_bins, "Histogram bins");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (c_gen->parsed()) return cmd_gen_data(gen, out);
    if (c_train->parsed()) return cmd_train(tr, out);
    if (c_adapt->parsed()) return cmd_adapt(ad, out);
    if (c_grad->parsed()) return cmd_gradcheck(gc_op, gc_trials, gc_seed, out);
    if (c_inspect->parsed()) return cmd_inspect(in_model, in_after, in_out, in_bins, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace diffpool::cli
