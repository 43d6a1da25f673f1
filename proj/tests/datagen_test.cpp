#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>

#include "diffpool/datagen.hpp"
#include "diffpool/errors.hpp"
#include "diffpool/text.hpp"

using namespace diffpool;
namespace fs = std::filesystem;

namespace {

// Best accuracy of any of `n_lines` random lines (either orientation).
double best_line_accuracy(const LabelledSet& s, std::size_t n_lines, std::uint64_t seed) {
  Rng rng(seed);
  double lo = INFINITY, hi = -INFINITY;
  for (double v : s.features.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double reach = std::max(std::abs(lo), std::abs(hi)) * 1.5;
  double best = 0.0;
  for (std::size_t l = 0; l < n_lines; ++l) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double c = rng.uniform(-reach, reach);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < s.size(); ++n) {
      const double side = std::cos(theta) * s.features(n, 0) + std::sin(theta) * s.features(n, 1) - c;
      hits += (side > 0.0) == (s.labels[n] == 1);
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(s.size());
    best = std::max({best, acc, 1.0 - acc});
  }
  return best;
}

class DatasetIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("diffpool_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

MultispeakerSpec small_spec() {
  MultispeakerSpec s;
  s.n_speakers_train = 3;
  s.n_speakers_test = 2;
  s.n_per_speaker = 60;
  s.dim = 4;
  s.n_classes = 3;
  return s;
}

}  // namespace

TEST(ClosedRegion, CountsAndSplits) {
  const auto ds = gen_closed_region(100, 0.0, 42);
  ds.validate();
  EXPECT_EQ(ds.size(), 200u);
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 0), 100);
  EXPECT_EQ(ds.select(Split::train).size(), 140u);
  EXPECT_EQ(ds.select(Split::test).size(), 60u);
  EXPECT_EQ(ds.speakers(Split::train), std::vector<int>{0});
}

TEST(ClosedRegion, NoLineSeparatesTheClasses) {
  const auto ds = gen_closed_region(100, 0.0, 42);
  LabelledSet all{ds.features, ds.labels};
  EXPECT_LE(best_line_accuracy(all, 10000, 1), 0.90);
}

TEST(ClosedRegion, Deterministic) {
  EXPECT_EQ(dataset_csv(gen_closed_region(50, 0.1, 9)), dataset_csv(gen_closed_region(50, 0.1, 9)));
  EXPECT_NE(dataset_csv(gen_closed_region(50, 0.1, 9)), dataset_csv(gen_closed_region(50, 0.1, 10)));
  EXPECT_THROW(gen_closed_region(0, 0.0, 1), ConfigError);
}

TEST(ClosedRegion, GoldenChecksum) {
  EXPECT_EQ(to_hex(fnv1a64(dataset_csv(gen_closed_region(500, 0.0, 42)))), "bb85d966178a25a7");
}

TEST(Multispeaker, StructureAndSplits) {
  const auto ds = gen_multispeaker(small_spec(), 3);
  ds.validate();
  EXPECT_EQ(ds.size(), 5u * 60u);
  EXPECT_EQ(ds.speakers(Split::train), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(ds.speakers(Split::adapt), (std::vector<int>{3, 4}));
  EXPECT_EQ(ds.speakers(Split::test), (std::vector<int>{3, 4}));
  for (int spk : {3, 4}) {
    EXPECT_EQ(ds.select(Split::adapt, spk).size(), 30u);
    EXPECT_EQ(ds.select(Split::test, spk).size(), 30u);
  }
  EXPECT_EQ(ds.features.cols(), 4u);
}

TEST(Multispeaker, LabelMarginalsUniform) {
  MultispeakerSpec s = small_spec();
  s.n_per_speaker = 1200;
  const auto ds = gen_multispeaker(s, 4);
  std::map<std::pair<int, int>, int> counts;
  for (std::size_t n = 0; n < ds.size(); ++n) ++counts[{ds.speaker_ids[n], ds.labels[n]}];
  for (const auto& [key, c] : counts) {
    EXPECT_NEAR(static_cast<double>(c) / 1200.0, 1.0 / 3.0, 0.02);
  }
}

TEST(Multispeaker, ZeroShiftMatchesTrainingDistribution) {
  MultispeakerSpec s = small_spec();
  s.n_per_speaker = 4000;
  s.shift.magnitude = 0.0;
  const auto ds = gen_multispeaker(s, 5);
  // Per-class means agree across a training and a test speaker.
  for (int cls = 0; cls < 3; ++cls) {
    for (std::size_t d = 0; d < 4; ++d) {
      double m0 = 0, m3 = 0;
      int n0 = 0, n3 = 0;
      for (std::size_t n = 0; n < ds.size(); ++n) {
        if (ds.labels[n] != cls) continue;
        if (ds.speaker_ids[n] == 0) m0 += ds.features(n, d), ++n0;
        if (ds.speaker_ids[n] == 3) m3 += ds.features(n, d), ++n3;
      }
      EXPECT_NEAR(m0 / n0, m3 / n3, 0.15);
    }
  }
}

TEST(Multispeaker, InvalidSpecs) {
  MultispeakerSpec s = small_spec();
  s.dim = 1;
  EXPECT_THROW(gen_multispeaker(s, 1), ConfigError);
  s = small_spec();
  s.n_classes = 1;
  EXPECT_THROW(gen_multispeaker(s, 1), ConfigError);
  s = small_spec();
  s.shift.magnitude = -1;
  EXPECT_THROW(gen_multispeaker(s, 1), ConfigError);
}

TEST_F(DatasetIo, RoundTripIsExact) {
  const auto ds = gen_multispeaker(small_spec(), 6);
  save_dataset(ds, dir_);
  const auto back = load_dataset(dir_);
  EXPECT_EQ(back, ds);
  std::ifstream in(dir_ / "data.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "speaker_id,split,label,x0,x1,x2,x3");
}

TEST_F(DatasetIo, RowCountMismatchIsParseError) {
  save_dataset(gen_closed_region(10, 0.0, 1), dir_);
  {
    std::ofstream app(dir_ / "data.csv", std::ios::app);
    app << "0,train,1,0.5,0.5\n";
  }
  EXPECT_THROW(load_dataset(dir_), ParseError);
}

TEST_F(DatasetIo, MissingManifestIsParseError) {
  save_dataset(gen_closed_region(10, 0.0, 1), dir_);
  fs::remove(dir_ / "manifest.json");
  EXPECT_THROW(load_dataset(dir_), ParseError);
}
