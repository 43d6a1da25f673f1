#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffpool/matrix.hpp"
#include "diffpool/training.hpp"

namespace diffpool {

enum class Split { train, adapt, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct DatasetManifest {
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::string generator;
  std::uint64_t seed = 0;
  nlohmann::json generator_params = nlohmann::json::object();
  std::size_t n_rows = 0;

  bool operator==(const DatasetManifest&) const = default;
};

/// Labelled feature rows tagged with a speaker id and a split.
struct SpeakerDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> speaker_ids;
  std::vector<Split> splits;
  DatasetManifest manifest;

  std::size_t size() const { return labels.size(); }

  /// Rows in `split`, optionally restricted to one speaker; original order.
  LabelledSet select(Split split, std::optional<int> speaker = std::nullopt) const;
  /// Sorted distinct speakers that own at least one row in `split`.
  std::vector<int> speakers(Split split) const;

  /// Throws ConfigError on inconsistent lengths or out-of-range labels.
  void validate() const;

  bool operator==(const SpeakerDataset&) const = default;
};

/// Two classes in the plane: class 0 uniformly inside an axis-aligned
/// ellipse, class 1 uniformly in an elliptical annulus around it. 70% of each
/// class is tagged train, the rest test. `noise` adds isotropic Gaussian jitter.
SpeakerDataset gen_closed_region(std::size_t n_per_class, double noise, std::uint64_t seed);

/// Per-speaker feature distortion. A speaker with magnitude g observes
/// x = diag(exp(g*log_scale_std*N)) * R(g*rotation_std*N) * (c + jitter) + g*offset_std*N,
/// where R is a product of random plane rotations. Training speakers use
/// g = magnitude * train_ratio, test speakers g = magnitude.
struct ShiftSpec {
  double magnitude = 0.7;
  double train_ratio = 0.2;
  double log_scale_std = 0.3;
  double rotation_std = 0.5;
  double offset_std = 0.5;
  double class_jitter = 0.0;  // stddev of a per-(speaker, class) mean perturbation

  void validate() const;
};

struct MultispeakerSpec {
  std::size_t n_speakers_train = 8;
  std::size_t n_speakers_test = 4;
  std::size_t n_per_speaker = 2000;
  std::size_t dim = 8;
  std::size_t n_classes = 6;
  double class_separation = 2.0;  // stddev of the class means
  double noise = 1.0;             // within-class stddev
  double adapt_fraction = 0.5;    // share of each test speaker tagged adapt
  ShiftSpec shift;

  void validate() const;
};

SpeakerDataset gen_multispeaker(const MultispeakerSpec& spec, std::uint64_t seed);

// On-disk layout: <dir>/data.csv (header "speaker_id,split,label,x0,..",
// features at 17 significant digits) and <dir>/manifest.json.
void save_dataset(const SpeakerDataset& ds, const std::filesystem::path& dir);
SpeakerDataset load_dataset(const std::filesystem::path& dir);

/// CSV payload as written by save_dataset.
std::string dataset_csv(const SpeakerDataset& ds);
nlohmann::json manifest_to_json(const DatasetManifest& m);

}  // namespace diffpool
