#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "json.hpp"

#include "baaf/dataset.hpp"
#include "baaf/errors.hpp"
#include "support.hpp"

using namespace baaf;
using testing::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

void write_f32(const std::filesystem::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

FeatureDataset clip_dataset(std::size_t clips, std::size_t frames) {
  std::vector<std::string> ids;
  ClipAssignment ca;
  std::vector<float> v;
  for (std::size_t c = 0; c < clips; ++c) {
    for (std::size_t f = 0; f < frames; ++f) {
      ids.push_back("c" + std::to_string(c) + "f" + std::to_string(f));
      ca.clip_of.push_back("clip" + std::to_string(c));
      ca.frame_index.push_back(static_cast<std::int64_t>(f));
      v.push_back(static_cast<float>(c));
      v.push_back(static_cast<float>(f));
    }
  }
  return {ids, FeatureMatrix(clips * frames, 2, v), ca};
}

void check_partition(const BagPartition& p, std::size_t samples, std::size_t n) {
  REQUIRE(p.n() == n);
  std::vector<int> seen(samples, 0);
  std::size_t lo = samples, hi = 0;
  for (const auto& bag : p.bags) {
    CHECK(std::is_sorted(bag.begin(), bag.end()));
    lo = std::min(lo, bag.size());
    hi = std::max(hi, bag.size());
    for (auto i : bag) {
      REQUIRE(i < samples);
      ++seen[i];
    }
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(hi - lo <= 1);
}

}  // namespace

TEST_CASE("feature matrix rejects wrong payload size") {
  CHECK_THROWS_AS(FeatureMatrix(2, 3, std::vector<float>(5)), ShapeError);
}

TEST_CASE("dataset construction enforces id uniqueness and finite values") {
  CHECK_THROWS_AS(FeatureDataset({"a", "a"}, FeatureMatrix(2, 1, {1, 2})), ValidationError);
  CHECK_THROWS_AS(FeatureDataset({"a", "b"}, FeatureMatrix(2, 1, {1, NAN})), ValidationError);
  CHECK_THROWS(FeatureDataset({"a"}, FeatureMatrix(2, 1, {1, 2})));
  const FeatureDataset ok({"a", "b"}, FeatureMatrix(2, 1, {1, 2}));
  CHECK(ok.index_of("b") == 1u);
  CHECK_FALSE(ok.index_of("zz").has_value());
}

TEST_CASE("clip assignments must be contiguous and frame ordered") {
  ClipAssignment split{{"x", "y", "x"}, {0, 0, 1}};
  CHECK_THROWS_AS(FeatureDataset({"a", "b", "c"}, FeatureMatrix(3, 1, {1, 2, 3}), split), ValidationError);
  ClipAssignment backwards{{"x", "x"}, {1, 0}};
  CHECK_THROWS_AS(FeatureDataset({"a", "b"}, FeatureMatrix(2, 1, {1, 2}), backwards), ValidationError);
  const auto ds = clip_dataset(3, 4);
  REQUIRE(ds.clip_spans().size() == 3);
  CHECK(ds.clip_spans()[1].begin == 4);
  CHECK(ds.clip_spans()[1].size() == 4);
}

TEST_CASE("load a 4x3 manifest without labels") {
  TempDir dir("load");
  write_f32(dir / "x.f32", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  write_file(dir / "m.json", R"({"feature_file":"x.f32","rows":4,"dim":3,"format":"f32le"})");
  const auto ds = load_dataset(dir / "m.json");
  CHECK(ds.data.size() == 4);
  CHECK(ds.data.dim() == 3);
  CHECK_FALSE(ds.labels.has_value());
  CHECK(ds.data.row(2)[1] == 8.0f);
  CHECK(ds.data.id(0) == "0");
}

TEST_CASE("short f32 payload is a shape error") {
  TempDir dir("short");
  write_f32(dir / "x.f32", {1, 2, 3, 4, 5});
  write_file(dir / "m.json", R"({"feature_file":"x.f32","rows":4,"dim":3,"format":"f32le"})");
  CHECK_THROWS_AS(load_dataset(dir / "m.json"), ShapeError);
}

TEST_CASE("labels covering only 3 of 4 samples fail validation") {
  TempDir dir("labels");
  write_f32(dir / "x.f32", std::vector<float>(8, 1.0f));
  write_file(dir / "l.csv", "0,0\n1,0\n2,1\n");
  write_file(dir / "m.json",
             R"({"feature_file":"x.f32","rows":4,"dim":2,"format":"f32le","labels_file":"l.csv"})");
  CHECK_THROWS_AS(load_dataset(dir / "m.json"), ValidationError);
}

TEST_CASE("csv payload: ids from the first column, duplicates and ragged rows rejected") {
  TempDir dir("csv");
  write_file(dir / "x.csv", "a,1,2\nb,3,4\n");
  write_file(dir / "m.json", R"({"feature_file":"x.csv","rows":2,"dim":2,"format":"csv"})");
  const auto ds = load_dataset(dir / "m.json");
  CHECK(ds.data.ids() == std::vector<std::string>{"a", "b"});
  CHECK(ds.data.row(1)[0] == 3.0f);

  write_file(dir / "dup.csv", "a,1,2\na,3,4\n");
  write_file(dir / "dup.json", R"({"feature_file":"dup.csv","rows":2,"dim":2,"format":"csv"})");
  CHECK_THROWS_AS(load_dataset(dir / "dup.json"), ValidationError);

  write_file(dir / "rag.csv", "a,1,2\nb,3\n");
  write_file(dir / "rag.json", R"({"feature_file":"rag.csv","rows":2,"dim":2,"format":"csv"})");
  CHECK_THROWS_AS(load_dataset(dir / "rag.json"), ValidationError);
}

TEST_CASE("write then load is the identity on features, ids, clips and labels") {
  TempDir dir("roundtrip");
  auto ds = clip_dataset(3, 5);
  // Values that do not survive a decimal round-trip at low precision.
  std::vector<float> v(ds.features().data().begin(), ds.features().data().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::nextafter(static_cast<float>(i) / 7.0f, 1e9f);
  ds = FeatureDataset(ds.ids(), FeatureMatrix(ds.size(), ds.dim(), v), ds.clips());
  EvalLabels labels;
  for (std::size_t i = 0; i < ds.size(); ++i) labels.set(ds.id(i), i % 4 ? Label::kNominal : Label::kAnomalous);
  const LabeledDataset original{ds, labels};
  for (auto format : {PayloadFormat::kF32le, PayloadFormat::kCsv}) {
    const auto path = dir / (format == PayloadFormat::kCsv ? "c.json" : "b.json");
    write_dataset(original, path, format);
    const auto back = load_dataset(path);
    CHECK(back.data == original.data);
    REQUIRE(back.labels.has_value());
    CHECK(*back.labels == labels);
  }
}

TEST_CASE("random_split: 10 samples into 4 bags") {
  const auto ds = testing::gaussian_dataset(10, 2, 1);
  const auto p = random_split(ds, 4, 42);
  check_partition(p, 10, 4);
  std::multiset<std::size_t> sizes;
  for (const auto& b : p.bags) sizes.insert(b.size());
  CHECK(sizes == std::multiset<std::size_t>{2, 2, 3, 3});
  CHECK(random_split(ds, 4, 42) == p);
  CHECK_FALSE(random_split(ds, 4, 43) == p);
}

TEST_CASE("random_split errors") {
  const auto ds = testing::gaussian_dataset(5, 2, 1);
  CHECK_THROWS_AS(random_split(ds, 1, 0), ParameterError);
  CHECK_THROWS_AS(random_split(ds, 6, 0), ParameterError);
  CHECK_THROWS_AS(random_split(clip_dataset(3, 4), 4, 0), ParameterError);
}

TEST_CASE("random_split keeps clips whole: 6 clips of 20 frames, n=2") {
  const auto ds = clip_dataset(6, 20);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto p = random_split(ds, 2, seed);
    check_partition(p, ds.size(), 2);
    const auto bag_of = p.bag_of(ds.size());
    // Brute force: every pair of frames from the same clip shares a bag.
    for (std::size_t a = 0; a < ds.size(); ++a) {
      for (std::size_t b = a + 1; b < ds.size(); ++b) {
        if (ds.clips()->clip_of[a] == ds.clips()->clip_of[b]) REQUIRE(bag_of[a] == bag_of[b]);
      }
    }
    for (const auto& bag : p.bags) {
      CHECK(bag.size() == 60);
      std::set<std::string> clips;
      for (auto i : bag) clips.insert(ds.clips()->clip_of[i]);
      CHECK(clips.size() == 3);
    }
  }
}

TEST_CASE("partition property holds across sizes, bag counts and seeds") {
  for (std::size_t rows = 2; rows <= 40; rows += 3) {
    const auto ds = testing::gaussian_dataset(rows, 1, rows);
    for (std::size_t n = 2; n <= std::min<std::size_t>(rows, 9); ++n) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) check_partition(random_split(ds, n, seed), rows, n);
    }
  }
}

TEST_CASE("random_split assignment looks uniform") {
  // Sample 0 should land in each of 4 bags about a quarter of the time.
  const auto ds = testing::gaussian_dataset(12, 1, 0);
  std::vector<int> hits(4, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) ++hits[random_split(ds, 4, seed).bag_of(12)[0]];
  for (int h : hits) CHECK(std::abs(h - 1000) < 150);
}

TEST_CASE("subset keeps ids and rows") {
  const auto ds = clip_dataset(2, 3);
  const std::vector<std::size_t> idx{1, 2, 4};
  const auto sub = ds.subset(idx);
  CHECK(sub.ids() == std::vector<std::string>{"c0f1", "c0f2", "c1f1"});
  CHECK(sub.row(2)[1] == 1.0f);
  CHECK(sub.has_clips());
}
