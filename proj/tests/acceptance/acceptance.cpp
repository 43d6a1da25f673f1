// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.
//
//   acceptance --workdir DIR --configs DIR [--only N]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "diffpool/adaptation.hpp"
#include "diffpool/datagen.hpp"
#include "diffpool/errors.hpp"
#include "diffpool/gradcheck.hpp"
#include "diffpool/model_io.hpp"
#include "diffpool/pooling.hpp"
#include "diffpool/text.hpp"
#include "diffpool/training.hpp"

using namespace diffpool;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  fs::path configs;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI; throws with its stderr on a non-zero exit.
std::string cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  if (code != 0) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw Error("diffpool " + joined + "exited " + std::to_string(code) + ": " + err.str());
  }
  return out.str();
}

fs::path output_dir(const std::string& text) {
  const auto pos = text.find("output: ");
  if (pos == std::string::npos) throw Error("no output line in: " + text);
  return text.substr(pos + 8, text.find('\n', pos) - pos - 8);
}

void fresh(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
}

// --- 1 ---------------------------------------------------------------------

Verdict gradient_correctness(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (GradcheckOp op : {GradcheckOp::lp, GradcheckOp::gauss, GradcheckOp::lhuc, GradcheckOp::model}) {
    GradcheckOptions opts;
    opts.trials = 200;
    const auto r = run_gradcheck(op, opts);
    double worst = 0.0;
    for (const auto& [_, e] : r.max_error) worst = std::max(worst, e);
    ok = ok && r.passed() && r.trials >= 200;
    detail += std::string(to_string(op)) + "=" + fmt(worst, 3) + " ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && secs < 60.0;
  return {ok, "max rel err " + detail + "(tol 1e-5), " + fmt(secs, 3) + " s (limit 60 s)"};
}

// --- 2 ---------------------------------------------------------------------

Verdict lp_limits(const Context&) {
  Rng rng(2024);
  std::size_t bad_l2 = 0, bad_l1 = 0, checked_max = 0;
  double worst_max = 0.0;
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    Vector a(k);
    for (auto& v : a) v = rng.uniform(-5.0, 5.0);
    const Matrix x(1, k, a);
    double sq = 0.0, abs_sum = 0.0;
    for (double v : a) {
      sq += v * v;
      abs_sum += std::abs(v);
    }
    if (lp_forward(x, {k, 1, false}, {{2.0}}).out(0, 0) != std::sqrt(sq)) ++bad_l2;
    if (lp_forward(x, {k, 1, false}, {{1.0}}).out(0, 0) != abs_sum) ++bad_l1;

    Vector mags(k);
    std::transform(a.begin(), a.end(), mags.begin(), [](double v) { return std::abs(v); });
    std::sort(mags.rbegin(), mags.rend());
    if (mags[1] > 0.9 * mags[0]) continue;
    ++checked_max;
    const double f = lp_forward(x, {k, 1, false}, {{200.0}}).out(0, 0);
    worst_max = std::max(worst_max, std::abs(f - mags[0]) / mags[0]);
  }
  const bool ok = bad_l2 == 0 && bad_l1 == 0 && worst_max <= 1e-2 && checked_max > 1000;
  return {ok, "p=2 mismatches " + std::to_string(bad_l2) + ", p=1 mismatches " + std::to_string(bad_l1) +
                  ", p=200 worst rel err " + fmt(worst_max, 3) + " over " + std::to_string(checked_max) +
                  " pools (tol 1e-2)"};
}

// --- 3 ---------------------------------------------------------------------

Verdict gauss_limits(const Context&) {
  Rng rng(77);
  double worst_mean = 0.0, worst_sharp = 0.0, worst_simplex = 0.0;
  bool negative = false;
  std::size_t sharp_checked = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    Matrix a(1, k);
    for (auto& v : a.data()) v = rng.normal(0.0, 1.5);
    const double mu = rng.normal(0.0, 1.0), eta = rng.uniform(0.2, 3.0);
    const PoolSpec spec{k, 1, false};

    const auto avg = gauss_forward(a, spec, {{mu}, {0.0}, {eta}});
    const auto& z = avg.ws.z;
    double mean = 0.0;
    for (std::size_t i = 0; i < k; ++i) mean += z(0, i);
    mean /= static_cast<double>(k);
    worst_mean = std::max(worst_mean, std::abs(avg.out(0, 0) - mean));

    std::vector<std::pair<double, double>> dist;
    for (std::size_t i = 0; i < k; ++i) dist.emplace_back(std::abs(z(0, i) - mu), z(0, i));
    std::sort(dist.begin(), dist.end());
    if (k == 1 || dist[1].first - dist[0].first >= 1e-2) {
      ++sharp_checked;
      const auto sharp = gauss_forward(a, spec, {{mu}, {1e6}, {eta}});
      worst_sharp = std::max(worst_sharp, std::abs(sharp.out(0, 0) - dist[0].second));
    }

    const double beta = std::pow(10.0, rng.uniform(-4.0, 8.0)) * (rng.below(10) == 0 ? -1e-3 : 1.0);
    const auto any = gauss_forward(a, spec, {{mu}, {beta}, {eta}});
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      negative = negative || any.ws.weights(0, i) < 0.0;
      s += any.ws.weights(0, i);
    }
    worst_simplex = std::max(worst_simplex, std::abs(s - 1.0));
  }
  const bool ok = worst_mean <= 1e-12 && worst_sharp <= 1e-6 && worst_simplex <= 1e-12 && !negative &&
                  sharp_checked > 1000;
  return {ok, "beta=0 |f-mean| " + fmt(worst_mean, 3) + " (tol 1e-12), beta=1e6 |f-z*| " + fmt(worst_sharp, 3) +
                  " (tol 1e-6), |sum u - 1| " + fmt(worst_simplex, 3) + " (tol 1e-12), u>=0 " +
                  (negative ? "violated" : "held")};
}

// --- 4 ---------------------------------------------------------------------

Verdict zeta_gate(const Context&) {
  Rng rng(4);
  std::size_t nonzero = 0, checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 2 + rng.below(4), pools = 1 + rng.below(3), batch = 1 + rng.below(4);
    Matrix a(batch, k * pools);
    for (auto& v : a.data()) v = rng.normal(0.0, 2.0);
    if (trial % 10 == 0) a.data().assign(a.size(), 0.0);
    Vector rho(pools);
    for (auto& r : rho) {
      const auto pick = rng.below(3);
      r = pick == 0 ? 1.0 : (pick == 1 ? rng.uniform(-5.0, 1.0) : rng.uniform(1.01, 6.0));
    }
    Matrix g(batch, pools);
    for (auto& v : g.data()) v = rng.normal();
    const auto fwd = lp_forward(a, {k, pools, rng.below(2) == 1}, {rho});
    const auto grads = lp_backward(fwd.ws, g);
    for (std::size_t p = 0; p < pools; ++p) {
      if (rho[p] > 1.0) continue;
      ++checked;
      if (grads.grad_rho[p] != 0.0) ++nonzero;
    }
  }
  // The same gate seen through a whole model.
  Rng mr(5);
  const std::vector<std::size_t> hidden{9, 6};
  Model m = build_model(make_architecture("lp", 4, hidden, 3, 3), mr);
  m.mutable_params(0).rho = {0.5, 1.0, 2.5};
  m.mutable_params(1).rho = {-1.0, 3.0};
  Matrix x(5, 4);
  for (auto& v : x.data()) v = mr.normal();
  const std::vector<int> t{0, 1, 2, 0, 1};
  const auto bw = backward(m, forward(m, x).trace, t);
  const bool model_ok = bw.grads[0].rho[0] == 0.0 && bw.grads[0].rho[1] == 0.0 && bw.grads[1].rho[0] == 0.0 &&
                        bw.grads[0].rho[2] != 0.0;
  return {nonzero == 0 && model_ok && checked > 1000,
          std::to_string(nonzero) + " non-zero grad_rho among " + std::to_string(checked) +
              " gated pools; whole-model gate " + (model_ok ? "held" : "violated")};
}

// --- 5 ---------------------------------------------------------------------

// Best accuracy of any line through two data points, either orientation.
double best_line_accuracy(const LabelledSet& s) {
  const std::size_t n = s.size();
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double nx = -(s.features(j, 1) - s.features(i, 1));
      const double ny = s.features(j, 0) - s.features(i, 0);
      const double c = nx * s.features(i, 0) + ny * s.features(i, 1);
      std::size_t pos = 0, on = 0;
      for (std::size_t r = 0; r < n; ++r) {
        const double side = nx * s.features(r, 0) + ny * s.features(r, 1) - c;
        if (side == 0.0) {
          ++on;
        } else {
          pos += (side > 0.0) == (s.labels[r] == 1);
        }
      }
      // Points on the line can be assigned to whichever side helps.
      best = std::max({best, pos + on, (n - on - pos) + on});
    }
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

Verdict closed_region(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path data = ctx.work / "closed_region";
  const std::string cfg = (ctx.configs / "closed_region_lp.json").string();
  fresh(data);
  cli({"gen-data", "--config", cfg, "--task", "closed-region", "--seed", "42", "--out", data.string()});
  const fs::path out = output_dir(cli({"train", "--config", cfg, "--data", data.string(), "--out",
                                       (ctx.work / "closed_region_runs").string()}));
  const Model model = load_model(out / "model.json");
  std::size_t lp_units = 0;
  for (std::size_t l : model.pool_layers()) lp_units += model.config(l).num_pools();
  const bool single_unit = lp_units == 1 && model.pool_type() == PoolType::lp &&
                           model.config(model.pool_layers().front()).pool_size == 2;

  const SpeakerDataset ds = load_dataset(data);
  const double acc = 1.0 - evaluate(model, ds.select(Split::test)).frame_error;
  const double line = best_line_accuracy(LabelledSet{ds.features, ds.labels});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = single_unit && acc >= 0.95 && line <= 0.90 && secs < 120.0;
  return {ok, "single Lp unit (K=2) test accuracy " + fmt(acc) + " (>= 0.95), best line " + fmt(line) +
                  " (<= 0.90), " + fmt(secs, 3) + " s (limit 120 s)"};
}

// --- 6, 7, 8 ---------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  fs::path data;
  fs::path si_model;
  double si_train_speaker_error = 0.0;
  double before = 0.0;
  std::map<std::string, double> after;  // variant -> mean error after
  std::map<std::string, fs::path> adapt_dirs;
  double err_iter1 = 0.0;
  double err_iter10 = 0.0;
};

// Mean error per iteration over all speakers and repeats of one adapt run.
std::vector<double> iteration_means(const fs::path& csv_path) {
  std::istringstream in(slurp(csv_path));
  std::string line;
  std::getline(in, line);
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  while (std::getline(in, line)) {
    const auto f = split(line, ',');
    auto& [sum, n] = acc[std::stoul(std::string(f[3]))];
    sum += parse_double(f[4]);
    ++n;
  }
  std::vector<double> out;
  for (const auto& [_, v] : acc) out.push_back(v.first / static_cast<double>(v.second));
  return out;
}

class AdaptationStudy {
 public:
  explicit AdaptationStudy(const Context& ctx) : ctx_(ctx) {}

  const std::vector<SeedRun>& runs() {
    if (!done_) run_all();
    return runs_;
  }
  double seconds() {
    runs();
    return seconds_;
  }

 private:
  void run_all() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string cfg = (ctx_.configs / "multispeaker_lp.json").string();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SeedRun r;
      r.seed = seed;
      const std::string s = std::to_string(seed);
      r.data = ctx_.work / ("multispeaker_" + s);
      fresh(r.data);
      cli({"gen-data", "--config", cfg, "--task", "multispeaker", "--seed", s, "--out", r.data.string()});
      const fs::path tr = output_dir(cli({"train", "--config", cfg, "--data", r.data.string(), "--seed", s,
                                          "--out", (ctx_.work / "si_runs").string()}));
      r.si_model = tr / "model.json";
      r.si_train_speaker_error = json::parse(slurp(tr / "train_summary.json")).at("valid_error").get<double>();

      auto adapt = [&](const std::string& name, std::vector<std::string> extra) {
        std::vector<std::string> args{"adapt", "--config", cfg, "--model", r.si_model.string(), "--data",
                                      r.data.string(), "--seed", s, "--out", (ctx_.work / "adapt_runs").string()};
        args.insert(args.end(), extra.begin(), extra.end());
        const fs::path dir = output_dir(cli(args));
        const json summary = json::parse(slurp(dir / "adapt_summary.json"));
        r.before = summary.at("mean_error_before").get<double>();
        r.after[name] = summary.at("mean_error_after").get<double>();
        r.adapt_dirs[name] = dir;
      };
      adapt("rho/self", {"--subset", "rho", "--labels", "self"});
      adapt("rho+lhuc/self", {"--subset", "rho,lhuc", "--labels", "self"});
      adapt("rho/oracle", {"--subset", "rho", "--labels", "oracle"});
      adapt("rho/self/10it", {"--subset", "rho", "--labels", "self", "--iters", "10"});
      const auto per_iter = iteration_means(r.adapt_dirs["rho/self/10it"] / "adapt_report.csv");
      r.err_iter1 = per_iter.at(1);
      r.err_iter10 = per_iter.at(10);
      runs_.push_back(std::move(r));
    }
    seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    done_ = true;
  }

  const Context& ctx_;
  bool done_ = false;
  std::vector<SeedRun> runs_;
  double seconds_ = 0.0;
};

AdaptationStudy* g_study = nullptr;

double mean_of(const std::vector<SeedRun>& runs, const std::function<double(const SeedRun&)>& f) {
  double s = 0.0;
  for (const auto& r : runs) s += f(r);
  return s / static_cast<double>(runs.size());
}

Verdict adaptation_direction(const Context&) {
  const auto& runs = g_study->runs();
  std::size_t improved = 0;
  std::string per_seed;
  for (const auto& r : runs) {
    improved += r.after.at("rho/self") < r.before;
    per_seed += fmt(r.before, 3) + "->" + fmt(r.after.at("rho/self"), 3) + " ";
  }
  const double rho = mean_of(runs, [](const SeedRun& r) { return r.after.at("rho/self"); });
  const double rho_lhuc = mean_of(runs, [](const SeedRun& r) { return r.after.at("rho+lhuc/self"); });
  const double oracle = mean_of(runs, [](const SeedRun& r) { return r.after.at("rho/oracle"); });
  const double si_gap =
      mean_of(runs, [](const SeedRun& r) { return r.before - r.si_train_speaker_error; });
  const double secs = g_study->seconds();
  const bool ok = improved >= 4 && rho_lhuc <= rho && oracle <= rho && secs < 600.0;
  return {ok, "{rho} self improved " + std::to_string(improved) + "/5 seeds [" + per_seed + "]; mean {rho} " +
                  fmt(rho) + ", {rho,lhuc} " + fmt(rho_lhuc) + ", oracle " + fmt(oracle) +
                  "; SI degradation " + fmt(si_gap, 3) + "; " + fmt(secs, 3) + " s (limit 600 s)"};
}

Verdict iteration_stability(const Context&) {
  bool ok = true;
  std::string detail;
  for (const auto& r : g_study->runs()) {
    ok = ok && r.err_iter10 <= r.err_iter1 + 0.01;
    detail += "seed " + std::to_string(r.seed) + ": " + fmt(r.err_iter1, 3) + "->" + fmt(r.err_iter10, 3) + " ";
  }
  return {ok, "1 vs 10 iterations " + detail + "(allow +0.01)"};
}

// Every group outside `allowed` (restricted to `layers`) is bit-identical.
bool frozen_exact(const Model& si, const Model& adapted, const std::vector<ParamGroup>& allowed,
                  const std::vector<std::size_t>& layers) {
  if (si.configs() != adapted.configs()) return false;
  for (std::size_t l = 0; l < si.num_layers(); ++l) {
    for (ParamGroup g : kAllParamGroups) {
      const bool may_change = std::find(allowed.begin(), allowed.end(), g) != allowed.end() &&
                              std::find(layers.begin(), layers.end(), l) != layers.end();
      if (may_change) continue;
      const auto a = si.params(l).group(g);
      const auto b = adapted.params(l).group(g);
      if (!std::equal(a.begin(), a.end(), b.begin(), b.end(),
                      [](double x, double y) { return std::bit_cast<std::uint64_t>(x) ==
                                                      std::bit_cast<std::uint64_t>(y); })) {
        return false;
      }
    }
  }
  return true;
}

Verdict freezing_exactness(const Context& ctx) {
  std::size_t checked = 0, violations = 0;
  const std::map<std::string, std::vector<ParamGroup>> subsets{
      {"rho/self", {ParamGroup::rho}},
      {"rho+lhuc/self", {ParamGroup::rho, ParamGroup::lhuc}},
      {"rho/oracle", {ParamGroup::rho}},
      {"rho/self/10it", {ParamGroup::rho}}};
  for (const auto& r : g_study->runs()) {
    const Model si = load_model(r.si_model);
    for (const auto& [name, groups] : subsets) {
      for (const auto& entry : fs::directory_iterator(r.adapt_dirs.at(name) / "models")) {
        ++checked;
        if (!frozen_exact(si, load_model(entry.path()), groups, si.pool_layers())) ++violations;
      }
    }
  }
  // Gauss subsets and bottom-layer restriction, in process.
  MultispeakerSpec spec;
  spec.n_per_speaker = 400;
  const SpeakerDataset ds = gen_multispeaker(spec, 9);
  const std::vector<std::size_t> hidden{20, 20};
  Rng rng(9);
  TrainConfig tc;
  tc.initial_lr = 0.08;
  tc.max_epochs = 3;
  const Model gauss = train(build_model(make_architecture("gauss", spec.dim, hidden, 5, spec.n_classes), rng),
                            ds.select(Split::train), ds.select(Split::train), tc)
                          .model;
  const std::vector<std::vector<ParamGroup>> gauss_subsets{
      {ParamGroup::mu, ParamGroup::beta},
      {ParamGroup::eta},
      {ParamGroup::biases, ParamGroup::lhuc},
      {ParamGroup::mu, ParamGroup::beta, ParamGroup::eta, ParamGroup::biases, ParamGroup::lhuc}};
  for (const auto& groups : gauss_subsets) {
    for (std::optional<std::size_t> bottom : {std::optional<std::size_t>{}, std::optional<std::size_t>{1}}) {
      AdaptConfig cfg;
      cfg.param_subset = groups;
      cfg.bottom_layers = bottom;
      for (int spk : ds.speakers(Split::adapt)) {
        const Model adapted = adapt_speaker(gauss, ds.select(Split::adapt, spk), cfg);
        ++checked;
        if (!frozen_exact(gauss, adapted, groups, adapted_layers(gauss, cfg))) ++violations;
      }
    }
  }
  (void)ctx;
  return {violations == 0 && checked > 0,
          std::to_string(violations) + " violations over " + std::to_string(checked) +
              " adapted models (Lp via CLI, Gauss subsets in process)"};
}

// --- 9 ---------------------------------------------------------------------

Verdict max_norm(const Context&) {
  double worst = 0.0;
  std::size_t updates = 0;
  auto watch = [&](const Model& m) {
    worst = std::max(worst, max_column_norm(m));
    ++updates;
  };
  MultispeakerSpec spec;
  spec.n_per_speaker = 500;
  const SpeakerDataset ms = gen_multispeaker(spec, 3);
  const SpeakerDataset toy = gen_closed_region(500, 0.0, 42);
  const std::vector<std::size_t> hidden{40, 40};
  const std::vector<std::size_t> toy_hidden{2};
  struct Case {
    const char* type;
    double lr;
    double momentum;
  };
  for (const Case c : {Case{"lp", 0.05, 0.0}, Case{"gauss", 0.08, 0.0}, Case{"dnn", 0.5, 0.0},
                       Case{"lp", 0.05, 0.9}}) {
    Rng rng(3);
    TrainConfig tc;
    tc.initial_lr = c.lr;
    tc.momentum = c.momentum;
    tc.max_epochs = 5;
    train(build_model(make_architecture(c.type, spec.dim, hidden, 5, spec.n_classes), rng),
          ms.select(Split::train), ms.select(Split::test), tc, watch);
  }
  Rng rng(42);
  TrainConfig tc;
  tc.initial_lr = 0.05;
  tc.batch_size = 4;
  tc.max_epochs = 20;
  train(build_model(make_architecture("lp", 2, toy_hidden, 2, 2), rng), toy.select(Split::train),
        toy.select(Split::test), tc, watch);
  return {worst <= 1.0 + 1e-9 && updates > 0,
          "max affine column norm " + fmt(worst, 17) + " over " + std::to_string(updates) +
              " updates (limit 1.0 + 1e-9)"};
}

// --- 10 --------------------------------------------------------------------

Verdict determinism(const Context& ctx) {
  std::vector<std::string> problems;
  const std::string cfg = (ctx.configs / "multispeaker_lp.json").string();
  const std::string small = R"({"data":{"multispeaker":{"n_per_speaker":300}},"model":{"hidden":[20,20]},
                                 "train":{"max_epochs":4}})";
  const fs::path small_cfg = ctx.work / "determinism_config.json";
  fs::create_directories(ctx.work);
  std::ofstream(small_cfg) << small;

  // Datasets: generate twice into separate directories.
  const fs::path d1 = ctx.work / "det_data_a", d2 = ctx.work / "det_data_b";
  fresh(d1);
  fresh(d2);
  for (const auto& d : {d1, d2}) {
    cli({"gen-data", "--config", small_cfg.string(), "--task", "multispeaker", "--seed", "3", "--out", d.string()});
  }
  for (const char* f : {"data.csv", "manifest.json"}) {
    if (slurp(d1 / f) != slurp(d2 / f)) problems.push_back(std::string("gen-data ") + f + " differs");
  }

  // Training twice into separate roots.
  std::vector<fs::path> trained;
  for (const char* root : {"det_train_a", "det_train_b"}) {
    fresh(ctx.work / root);
    trained.push_back(output_dir(cli({"train", "--config", small_cfg.string(), "--data", d1.string(), "--seed",
                                      "3", "--out", (ctx.work / root).string()})));
  }
  for (const char* f : {"model.json", "train_report.csv", "train_summary.json"}) {
    if (slurp(trained[0] / f) != slurp(trained[1] / f)) problems.push_back(std::string("train ") + f + " differs");
  }

  // Adaptation twice.
  std::vector<fs::path> adapted;
  for (const char* root : {"det_adapt_a", "det_adapt_b"}) {
    fresh(ctx.work / root);
    adapted.push_back(output_dir(cli({"adapt", "--config", cfg, "--model", (trained[0] / "model.json").string(),
                                      "--data", d1.string(), "--subset", "rho,lhuc", "--sweep", "100,all",
                                      "--out", (ctx.work / root).string()})));
  }
  for (const char* f : {"adapt_report.csv", "adapt_summary.json", "histogram_p.csv"}) {
    if (slurp(adapted[0] / f) != slurp(adapted[1] / f)) problems.push_back(std::string("adapt ") + f + " differs");
  }
  for (const auto& entry : fs::directory_iterator(adapted[0] / "models")) {
    if (slurp(entry.path()) != slurp(adapted[1] / "models" / entry.path().filename())) {
      problems.push_back("adapted model " + entry.path().filename().string() + " differs");
    }
  }

  // Round trips.
  const Model m = load_model(trained[0] / "model.json");
  save_model(m, ctx.work / "det_roundtrip.json");
  if (slurp(ctx.work / "det_roundtrip.json") != slurp(trained[0] / "model.json")) {
    problems.push_back("model save/load/save not byte-identical");
  }
  const Model adapted_model = load_model(adapted[0] / "models" / "speaker_8.json");
  save_model(adapted_model, ctx.work / "det_roundtrip_adapted.json");
  if (!load_model(ctx.work / "det_roundtrip_adapted.json").same_parameters(adapted_model)) {
    problems.push_back("adapted model round trip changed parameters");
  }
  MultispeakerSpec spec;
  spec.n_per_speaker = 300;
  const SpeakerDataset ds = gen_multispeaker(spec, 3);
  if (!(load_dataset(d1) == ds)) problems.push_back("dataset load differs from generator output");
  const fs::path d3 = ctx.work / "det_data_c";
  fresh(d3);
  save_dataset(load_dataset(d1), d3);
  if (slurp(d3 / "data.csv") != slurp(d1 / "data.csv")) problems.push_back("dataset re-save differs");

  std::string detail = problems.empty() ? "datasets, models, train/adapt reports identical; round trips exact"
                                        : "";
  for (const auto& p : problems) detail += p + "; ";
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffpool acceptance suite"};
  Context ctx;
  std::string work = (fs::temp_directory_path() / "diffpool_acceptance").string();
  std::string configs = DIFFPOOL_CONFIG_DIR;
  std::vector<int> only;
  app.add_option("--workdir", work, "Scratch directory");
  app.add_option("--configs", configs, "Directory holding the run configurations");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  ctx.configs = configs;
  fs::create_directories(ctx.work);

  AdaptationStudy study(ctx);
  g_study = &study;

  const std::vector<std::pair<std::string, std::function<Verdict(const Context&)>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"Lp limit identities", lp_limits},
      {"Gauss limit identities", gauss_limits},
      {"zeta gate", zeta_gate},
      {"closed-region toy task", closed_region},
      {"adaptation direction", adaptation_direction},
      {"multi-iteration stability", iteration_stability},
      {"freezing exactness", freezing_exactness},
      {"max-norm constraint", max_norm},
      {"determinism and persistence", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
