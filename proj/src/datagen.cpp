#include "diffpool/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "diffpool/errors.hpp"
#include "diffpool/rng.hpp"
#include "diffpool/text.hpp"

namespace diffpool {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Closed-region geometry, in ellipse-normalised radius.
constexpr double kCentreX = 0.3;
constexpr double kCentreY = -0.2;
constexpr double kSemiX = 3.0;
constexpr double kSemiY = 1.5;
constexpr double kInnerMaxRadius = 1.0;
constexpr double kOuterMinRadius = 1.3;
constexpr double kOuterMaxRadius = 2.2;
constexpr double kClosedRegionTrainShare = 0.7;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Point uniformly distributed (by area) in the ring r_lo <= r <= r_hi of the
// unit disc, mapped through the ellipse axes.
std::pair<double, double> sample_ring(Rng& rng, double r_lo, double r_hi) {
  const double u = rng.uniform();
  const double r = std::sqrt(r_lo * r_lo + u * (r_hi * r_hi - r_lo * r_lo));
  const double theta = 2.0 * kPi * rng.uniform();
  return {kCentreX + kSemiX * r * std::cos(theta), kCentreY + kSemiY * r * std::sin(theta)};
}

struct SpeakerTransform {
  Matrix linear;  // dim x dim
  Vector offset;
  std::vector<Vector> class_jitter;
};

SpeakerTransform make_transform(Rng& rng, std::size_t dim, std::size_t n_classes, double g,
                                const ShiftSpec& shift) {
  SpeakerTransform t;
  t.linear = Matrix(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) t.linear(i, i) = 1.0;
  // One random plane rotation per coordinate pair in a chain; angles scale with g.
  for (std::size_t i = 0; i + 1 < dim; ++i) {
    const std::size_t j = i + 1 + rng.below(dim - i - 1);
    const double angle = g * shift.rotation_std * rng.normal();
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t col = 0; col < dim; ++col) {
      const double xi = t.linear(i, col), xj = t.linear(j, col);
      t.linear(i, col) = c * xi - s * xj;
      t.linear(j, col) = s * xi + c * xj;
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double scale = std::exp(g * shift.log_scale_std * rng.normal());
    for (std::size_t col = 0; col < dim; ++col) t.linear(i, col) *= scale;
  }
  t.offset.resize(dim);
  for (double& o : t.offset) o = g * shift.offset_std * rng.normal();
  t.class_jitter.assign(n_classes, Vector(dim, 0.0));
  for (auto& cj : t.class_jitter) {
    for (double& v : cj) v = g * shift.class_jitter * rng.normal();
  }
  return t;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::adapt: return "adapt";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "adapt") return Split::adapt;
  if (s == "test") return Split::test;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

LabelledSet SpeakerDataset::select(Split split, std::optional<int> speaker) const {
  std::vector<std::size_t> idx;
  for (std::size_t n = 0; n < size(); ++n) {
    if (splits[n] == split && (!speaker || speaker_ids[n] == *speaker)) idx.push_back(n);
  }
  LabelledSet out;
  out.features = features.gather_rows(idx);
  out.labels.reserve(idx.size());
  for (std::size_t n : idx) out.labels.push_back(labels[n]);
  return out;
}

std::vector<int> SpeakerDataset::speakers(Split split) const {
  std::set<int> s;
  for (std::size_t n = 0; n < size(); ++n) {
    if (splits[n] == split) s.insert(speaker_ids[n]);
  }
  return {s.begin(), s.end()};
}

void SpeakerDataset::validate() const {
  const std::size_t n = labels.size();
  if (features.rows() != n || speaker_ids.size() != n || splits.size() != n) {
    throw ConfigError("dataset: column lengths disagree");
  }
  if (features.cols() != manifest.dim) throw ConfigError("dataset: feature width != manifest dim");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= manifest.n_classes) {
      throw ConfigError("dataset: label " + std::to_string(y) + " out of range");
    }
  }
}

// ---------------------------------------------------------------------------

SpeakerDataset gen_closed_region(std::size_t n_per_class, double noise, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("gen_closed_region: n_per_class must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("gen_closed_region: noise must be >= 0");
  Rng rng(seed);
  SpeakerDataset ds;
  ds.features = Matrix(2 * n_per_class, 2);
  const std::size_t n_train = static_cast<std::size_t>(
      std::llround(kClosedRegionTrainShare * static_cast<double>(n_per_class)));
  std::size_t row = 0;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<Split> tags(n_per_class, Split::test);
    std::fill(tags.begin(), tags.begin() + static_cast<std::ptrdiff_t>(n_train), Split::train);
    rng.shuffle(tags);
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      auto [x, y] = cls == 0 ? sample_ring(rng, 0.0, kInnerMaxRadius)
                             : sample_ring(rng, kOuterMinRadius, kOuterMaxRadius);
      if (noise > 0.0) {
        x += rng.normal(0.0, noise);
        y += rng.normal(0.0, noise);
      }
      ds.features(row, 0) = x;
      ds.features(row, 1) = y;
      ds.labels.push_back(cls);
      ds.speaker_ids.push_back(0);
      ds.splits.push_back(tags[i]);
    }
  }
  ds.manifest.dim = 2;
  ds.manifest.n_classes = 2;
  ds.manifest.generator = "closed-region";
  ds.manifest.seed = seed;
  ds.manifest.generator_params = {{"n_per_class", n_per_class}, {"noise", noise}};
  ds.manifest.n_rows = ds.size();
  return ds;
}

void ShiftSpec::validate() const {
  if (!(magnitude >= 0.0) || !(train_ratio >= 0.0) || !(log_scale_std >= 0.0) ||
      !(rotation_std >= 0.0) || !(offset_std >= 0.0) || !(class_jitter >= 0.0)) {
    throw ConfigError("shift spec: all magnitudes must be finite and >= 0");
  }
}

void MultispeakerSpec::validate() const {
  if (dim < 2) throw ConfigError("multispeaker: dim must be >= 2");
  if (n_classes < 2) throw ConfigError("multispeaker: n_classes must be >= 2");
  if (n_speakers_train < 1 || n_speakers_test < 1) {
    throw ConfigError("multispeaker: need at least one training and one test speaker");
  }
  if (n_per_speaker < 2) throw ConfigError("multispeaker: n_per_speaker must be >= 2");
  if (!(adapt_fraction > 0.0 && adapt_fraction < 1.0)) {
    throw ConfigError("multispeaker: adapt_fraction must lie in (0,1)");
  }
  if (!(class_separation > 0.0) || !(noise > 0.0)) {
    throw ConfigError("multispeaker: class_separation and noise must be > 0");
  }
  shift.validate();
}

SpeakerDataset gen_multispeaker(const MultispeakerSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng root(seed);
  Rng class_rng = root.fork(0);
  std::vector<Vector> means(spec.n_classes, Vector(spec.dim));
  for (auto& m : means) {
    for (double& v : m) v = class_rng.normal(0.0, spec.class_separation);
  }

  const std::size_t n_speakers = spec.n_speakers_train + spec.n_speakers_test;
  SpeakerDataset ds;
  ds.features = Matrix(n_speakers * spec.n_per_speaker, spec.dim);
  const std::size_t n_adapt = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.adapt_fraction *
                                            static_cast<double>(spec.n_per_speaker))),
      1, spec.n_per_speaker - 1);
  Vector clean(spec.dim);
  std::size_t row = 0;
  for (std::size_t s = 0; s < n_speakers; ++s) {
    const bool is_test = s >= spec.n_speakers_train;
    Rng rng = root.fork(1 + s);
    const double g = is_test ? spec.shift.magnitude : spec.shift.magnitude * spec.shift.train_ratio;
    const SpeakerTransform t = make_transform(rng, spec.dim, spec.n_classes, g, spec.shift);

    std::vector<int> labels(spec.n_per_speaker);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = static_cast<int>(i % spec.n_classes);
    }
    rng.shuffle(labels);
    std::vector<Split> tags(spec.n_per_speaker, Split::train);
    if (is_test) {
      std::fill(tags.begin(), tags.end(), Split::test);
      std::fill(tags.begin(), tags.begin() + static_cast<std::ptrdiff_t>(n_adapt), Split::adapt);
      rng.shuffle(tags);
    }
    for (std::size_t i = 0; i < spec.n_per_speaker; ++i, ++row) {
      const int y = labels[i];
      for (std::size_t d = 0; d < spec.dim; ++d) {
        clean[d] = means[y][d] + t.class_jitter[y][d] + rng.normal(0.0, spec.noise);
      }
      for (std::size_t d = 0; d < spec.dim; ++d) {
        double acc = t.offset[d];
        for (std::size_t e = 0; e < spec.dim; ++e) acc += t.linear(d, e) * clean[e];
        ds.features(row, d) = acc;
      }
      ds.labels.push_back(y);
      ds.speaker_ids.push_back(static_cast<int>(s));
      ds.splits.push_back(tags[i]);
    }
  }
  ds.manifest.dim = spec.dim;
  ds.manifest.n_classes = spec.n_classes;
  ds.manifest.generator = "multispeaker";
  ds.manifest.seed = seed;
  ds.manifest.generator_params = {{"n_speakers_train", spec.n_speakers_train},
                                  {"n_speakers_test", spec.n_speakers_test},
                                  {"n_per_speaker", spec.n_per_speaker},
                                  {"class_separation", spec.class_separation},
                                  {"noise", spec.noise},
                                  {"adapt_fraction", spec.adapt_fraction},
                                  {"shift",
                                   {{"magnitude", spec.shift.magnitude},
                                    {"train_ratio", spec.shift.train_ratio},
                                    {"log_scale_std", spec.shift.log_scale_std},
                                    {"rotation_std", spec.shift.rotation_std},
                                    {"offset_std", spec.shift.offset_std},
                                    {"class_jitter", spec.shift.class_jitter}}}};
  ds.manifest.n_rows = ds.size();
  return ds;
}

// ---------------------------------------------------------------------------

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  return {{"format_version", 1},
          {"dim", m.dim},
          {"n_classes", m.n_classes},
          {"generator", m.generator},
          {"seed", m.seed},
          {"generator_params", m.generator_params},
          {"n_rows", m.n_rows}};
}

std::string dataset_csv(const SpeakerDataset& ds) {
  std::string out = "speaker_id,split,label";
  for (std::size_t d = 0; d < ds.features.cols(); ++d) out += ",x" + std::to_string(d);
  out += '\n';
  for (std::size_t n = 0; n < ds.size(); ++n) {
    out += std::to_string(ds.speaker_ids[n]);
    out += ',';
    out += to_string(ds.splits[n]);
    out += ',';
    out += std::to_string(ds.labels[n]);
    for (double v : ds.features.row(n)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void save_dataset(const SpeakerDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "data.csv", std::ios::binary | std::ios::trunc);
    out << dataset_csv(ds);
    if (!out) throw Error("failed writing " + (dir / "data.csv").string());
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest_to_json(ds.manifest).dump(2) << '\n';
  if (!out) throw Error("failed writing " + (dir / "manifest.json").string());
}

SpeakerDataset load_dataset(const std::filesystem::path& dir) {
  SpeakerDataset ds;
  nlohmann::json jm;
  try {
    jm = nlohmann::json::parse(read_file(dir / "manifest.json"));
    ds.manifest.dim = jm.at("dim").get<std::size_t>();
    ds.manifest.n_classes = jm.at("n_classes").get<std::size_t>();
    ds.manifest.generator = jm.at("generator").get<std::string>();
    ds.manifest.seed = jm.at("seed").get<std::uint64_t>();
    ds.manifest.generator_params = jm.at("generator_params");
    ds.manifest.n_rows = jm.at("n_rows").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("dataset manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }

  const std::string csv = read_file(dir / "data.csv");
  auto lines = split(csv, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("dataset csv: missing header");
  const std::size_t n_fields = 3 + ds.manifest.dim;
  if (split(lines[0], ',').size() != n_fields) {
    throw ParseError("dataset csv: header has wrong number of columns for dim " +
                     std::to_string(ds.manifest.dim));
  }
  const std::size_t n_rows = lines.size() - 1;
  if (n_rows != ds.manifest.n_rows) {
    throw ParseError("dataset csv has " + std::to_string(n_rows) + " rows, manifest says " +
                     std::to_string(ds.manifest.n_rows));
  }
  ds.features = Matrix(n_rows, ds.manifest.dim);
  for (std::size_t n = 0; n < n_rows; ++n) {
    const auto fields = split(lines[n + 1], ',');
    if (fields.size() != n_fields) {
      throw ParseError("dataset csv line " + std::to_string(n + 2) + ": expected " +
                       std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
    }
    try {
      ds.speaker_ids.push_back(static_cast<int>(parse_double(fields[0])));
      ds.splits.push_back(parse_split(fields[1]));
      ds.labels.push_back(static_cast<int>(parse_double(fields[2])));
      for (std::size_t d = 0; d < ds.manifest.dim; ++d) {
        ds.features(n, d) = parse_double(fields[3 + d]);
      }
    } catch (const ParseError& e) {
      throw ParseError("dataset csv line " + std::to_string(n + 2) + ": " + e.what());
    }
  }
  try {
    ds.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("dataset: ") + e.what());
  }
  return ds;
}

}  // namespace diffpool
