#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "baaf/errors.hpp"
#include "baaf/metrics.hpp"
#include "baaf/sweep.hpp"
#include "baaf/synth.hpp"
#include "support.hpp"

using namespace baaf;

namespace {

double norm(std::span<const float> x) {
  double s = 0;
  for (float v : x) s += double(v) * v;
  return std::sqrt(s);
}

std::vector<bool> anomalous(const LabeledDataset& d) {
  std::vector<bool> out;
  for (const auto& id : d.data.ids()) out.push_back(d.labels->is_anomalous(id));
  return out;
}

LabeledDataset pool_of(std::size_t n) {
  SynthConfig c;
  c.dim = 3;
  c.n_nominal = 5;
  c.n_test_nominal = 5;
  c.n_anomaly = n;
  c.seed = 17;
  return synth_generate(c).test;
}

}  // namespace

TEST_CASE("d=2 nominals are finite and centered") {
  SynthConfig c;
  c.dim = 2;
  c.n_nominal = 100;
  const auto d = synth_generate(c);
  double m0 = 0, m1 = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(std::isfinite(d.train_nominal.row(i)[0]));
    m0 += d.train_nominal.row(i)[0] / 100.0;
    m1 += d.train_nominal.row(i)[1] / 100.0;
  }
  CHECK(std::abs(m0) < 0.5);
  CHECK(std::abs(m1) < 0.5);
}

TEST_CASE("every anomaly lies outside the rejection ball and inside the box") {
  for (std::size_t dim : {1, 2, 8, 16}) {
    SynthConfig c;
    c.dim = dim;
    c.n_anomaly = 200;
    c.seed = dim;
    const auto d = synth_generate(c);
    const auto labels = anomalous(d.test);
    std::size_t count = 0;
    for (std::size_t i = 0; i < d.test.data.size(); ++i) {
      if (!labels[i]) continue;
      ++count;
      CHECK(norm(d.test.data.row(i)) >= 4.0);
      for (float v : d.test.data.row(i)) CHECK(std::abs(v) <= 6.0f);
    }
    CHECK(count == 200);
  }
}

TEST_CASE("generator layout, labels and determinism") {
  SynthConfig c;
  c.seed = 5;
  const auto a = synth_generate(c);
  const auto b = synth_generate(c);
  CHECK(a.train_nominal == b.train_nominal);
  CHECK(a.test.data == b.test.data);
  CHECK(a.test.data.size() == 100);
  CHECK(a.test.labels->size() == 100);
  CHECK(a.test.data.id(0) == "test-n00000");
  c.seed = 6;
  CHECK_FALSE(synth_generate(c).train_nominal == a.train_nominal);
  c.dim = 0;
  CHECK_THROWS_AS(synth_generate(c), ParameterError);
}

TEST_CASE("knn on clean train ranks anomalies above the nominal 95th percentile") {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig c;
    c.seed = seed;
    const auto d = synth_generate(c);
    const auto det = fit(BackendConfig::knn(), d.train_nominal, 0);
    const auto scores = det.score_all(d.test.data.features());
    const auto labels = anomalous(d.test);
    std::vector<double> nominal;
    double anomaly_min = INFINITY;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i]) anomaly_min = std::min(anomaly_min, scores[i]);
      else nominal.push_back(scores[i]);
    }
    std::sort(nominal.begin(), nominal.end());
    const double p95 = nominal[static_cast<std::size_t>(std::ceil(0.95 * nominal.size())) - 1];
    good += anomaly_min > p95;
  }
  CHECK(good >= 19);
}

TEST_CASE("injection counts") {
  const auto pool = pool_of(60);
  const auto train90 = testing::gaussian_dataset(90, 3, 1);
  CorruptionSpec spec;
  spec.rate = 0.10;
  auto out = inject_corruption(train90, pool, spec);
  CHECK(out.injected_ids.size() == 10);
  CHECK(out.train.data.size() == 100);
  spec.rate = 0.40;
  CHECK(inject_corruption(testing::gaussian_dataset(60, 3, 2), pool, spec).injected_ids.size() == 40);
  spec.rate = 0.0;
  out = inject_corruption(train90, pool, spec);
  CHECK(out.train.data == train90);
  spec.rate = 0.2;
  spec.convention = RateConvention::kFractionOfNominal;
  CHECK(spec.injected_count(90) == 18);
}

TEST_CASE("injected fraction is within 1/|train| of the rate") {
  const auto pool = pool_of(120);
  for (std::size_t n = 10; n <= 150; n += 7) {
    for (double p : {0.05, 0.1, 0.25, 0.33, 0.45}) {
      CorruptionSpec spec;
      spec.rate = p;
      const auto a = spec.injected_count(n);
      if (a > 120) continue;
      const double frac = double(a) / double(n + a);
      CHECK(std::abs(frac - p) <= 1.0 / double(n));
    }
  }
}

TEST_CASE("injection errors and bookkeeping") {
  const auto pool = pool_of(5);
  CorruptionSpec spec;
  spec.rate = 0.4;
  CHECK_THROWS_AS(inject_corruption(testing::gaussian_dataset(60, 3, 1), pool, spec), ParameterError);
  spec.rate = 0.5;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
  spec.rate = 0.2;
  const auto out = inject_corruption(testing::gaussian_dataset(16, 3, 1), pool, spec);
  std::set<std::string> ids(out.injected_ids.begin(), out.injected_ids.end());
  CHECK(ids.size() == out.injected_ids.size());
  for (const auto& id : out.injected_ids) CHECK(out.train.labels->is_anomalous(id));
  CHECK(out.drawn_pool_ids == out.injected_ids);
}

TEST_CASE("overlapping keeps drawn anomalies in the test set; non-overlapping drops them") {
  const auto pool = pool_of(30);
  CorruptionSpec spec;
  spec.rate = 0.2;
  const auto out = inject_corruption(testing::gaussian_dataset(40, 3, 2), pool, spec);
  CHECK(evaluation_test_set(pool, out, CorruptionMode::kOverlapping).data == pool.data);
  const auto easy = evaluation_test_set(pool, out, CorruptionMode::kNonOverlapping);
  CHECK(easy.data.size() == pool.data.size() - out.drawn_pool_ids.size());
  for (const auto& id : out.drawn_pool_ids) CHECK_FALSE(easy.data.index_of(id).has_value());
}

TEST_CASE("near-duplicate mode injects jittered groups") {
  const auto pool = pool_of(30);
  CorruptionSpec spec;
  spec.rate = 0.2;
  spec.duplicate_group = 3;
  spec.duplicate_jitter = 0.05;
  const auto out = inject_corruption(testing::gaussian_dataset(48, 3, 3), pool, spec);
  CHECK(out.injected_ids.size() == 12);
  CHECK(out.drawn_pool_ids.size() == 4);
  for (const auto& id : out.drawn_pool_ids) {
    const auto src = *out.train.data.index_of(id);
    const auto copy = *out.train.data.index_of(id + "~dup1");
    double d = 0;
    for (std::size_t c = 0; c < 3; ++c) d += std::pow(out.train.data.row(src)[c] - out.train.data.row(copy)[c], 2);
    CHECK(std::sqrt(d) > 0.0);
    CHECK(std::sqrt(d) < 0.5);
  }
}

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, {false, false, true, true}) == 1.0);
  CHECK(auroc(std::vector<double>{3, 3, 3, 3}, {false, true, false, true}) == 0.5);
  CHECK(auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, {false, false, true, true}) == 0.75);
  CHECK_THROWS_AS(auroc(std::vector<double>{1, 2}, {true, true}), ParameterError);
}

TEST_CASE("auroc matches brute force and its symmetries") {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.uniform_index(29);
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 3 == 0 ? double(rng.uniform_index(5)) : rng.normal();
      y[i] = rng.uniform01() < 0.5;
    }
    y[0] = true;
    y[1] = false;
    const double a = auroc(s, y);
    CHECK(std::abs(a - testing::brute_auroc(s, y)) <= 1e-12);
    std::vector<double> mono, neg;
    std::vector<bool> flip;
    for (std::size_t i = 0; i < n; ++i) {
      mono.push_back(std::exp(s[i]) * 3.0 + 1.0);
      neg.push_back(-s[i]);
      flip.push_back(!y[i]);
    }
    CHECK(auroc(mono, y) == doctest::Approx(a).epsilon(1e-12));
    CHECK(auroc(neg, flip) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("filter precision and recall") {
  const auto pool = pool_of(20);
  CorruptionSpec spec;
  spec.rate = 0.1;
  const auto out = inject_corruption(testing::gaussian_dataset(90, 3, 4), pool, spec);
  REQUIRE(out.injected_ids.size() == 10);
  auto e = filter_precision_recall(out.injected_ids, out.train);
  CHECK(e.precision == 1.0);
  CHECK(e.recall == 1.0);
  e = filter_precision_recall({}, out.train);
  CHECK_FALSE(e.precision.has_value());
  CHECK(e.recall == 0.0);
  std::vector<std::string> removed(out.injected_ids.begin(), out.injected_ids.begin() + 8);
  for (int i = 0; i < 4; ++i) removed.push_back("s" + std::to_string(i));
  e = filter_precision_recall(removed, out.train);
  CHECK(*e.precision == doctest::Approx(8.0 / 12.0));
  CHECK(*e.recall == doctest::Approx(0.8));
  CHECK_THROWS_AS(filter_precision_recall({"nope"}, out.train), ParameterError);

  spec.rate = 0.0;
  const auto clean = inject_corruption(testing::gaussian_dataset(20, 3, 4), pool, spec);
  // No anomalies to find: both metrics are undefined even if something was removed.
  e = filter_precision_recall({"s1"}, clean.train);
  CHECK_FALSE(e.precision.has_value());
  CHECK_FALSE(e.recall.has_value());
}

TEST_CASE("small sweep: row count, null metrics at p=0, deterministic output") {
  SweepConfig config;
  config.synth = SynthConfig{8, 120, 40, 100, 4.0, 6.0, 0};
  config.baaf.n_bags = 4;
  config.baaf.k_votes = 1;
  const auto a = run_sweep(config);
  REQUIRE(a.rows.size() == 5);
  CHECK_FALSE(a.rows[0].filter_recall.has_value());
  CHECK_FALSE(a.rows[0].filter_precision.has_value());
  for (const auto& r : a.rows) {
    CHECK(r.i_auroc_filtered >= 0.0);
    CHECK(r.fit_calls == 5);
  }
  CHECK(a.dumps.size() == 5 * 4);
  const auto csv = metrics_to_csv(a.rows);
  CHECK(csv.rfind("config,seed,p,i_auroc_filtered,i_auroc_unfiltered,i_auroc_clean,filter_precision,filter_recall,fit_calls\n", 0) == 0);
  CHECK(csv.find("BAAF(1/4)+knn,0,0,") != std::string::npos);
  CHECK(csv == metrics_to_csv(run_sweep(config).rows));
  const auto hist = gmm_histogram_to_csv(a.dumps);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 1 + 20 * 20);
}
