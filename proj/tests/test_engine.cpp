#include <algorithm>
#include <set>

#include "doctest.h"
#include "json.hpp"

#include "baaf/engine.hpp"
#include "baaf/errors.hpp"
#include "baaf/metrics.hpp"
#include "baaf/report.hpp"
#include "baaf/synth.hpp"
#include "support.hpp"

using namespace baaf;

namespace {

BaafConfig make_config(std::size_t k, std::size_t n, BackendConfig backend = {}, std::uint64_t seed = 0) {
  BaafConfig c;
  c.k_votes = k;
  c.n_bags = n;
  c.backend = backend;
  c.master_seed = seed;
  return c;
}

}  // namespace

TEST_CASE("naming and validation") {
  CHECK(BaafConfig{}.name() == "BAAF(1/4)");
  CHECK(make_config(3, 4).name() == "BAAF(3/4)");
  CHECK_THROWS_AS(make_config(1, 1).validate(), ParameterError);
  CHECK_THROWS_AS(make_config(0, 4).validate(), ParameterError);
}

TEST_CASE("strict majority over n-1 predictors") {
  // Enumerate every count for 3 voters (n=4) and 5 voters (n=6).
  for (std::size_t v = 0; v <= 3; ++v) CHECK(majority_anomalous(v, 3) == (v >= 2));
  for (std::size_t v = 0; v <= 5; ++v) CHECK(majority_anomalous(v, 5) == (v >= 3));
  CHECK_FALSE(majority_anomalous(1, 2));
  CHECK(majority_anomalous(1, 1));
}

TEST_CASE("run_vote structure for n=4") {
  const auto ds = testing::gaussian_dataset(40, 3, 1);
  const auto rec = run_vote(ds, make_config(1, 4), 0);
  CHECK(rec.fit_call_count == 4);
  REQUIRE(rec.thresholds.size() == 4);
  std::vector<int> seen(ds.size(), 0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rec.predictors[i].size() == 3);
    CHECK(std::find(rec.predictors[i].begin(), rec.predictors[i].end(), i) == rec.predictors[i].end());
    for (const auto& p : rec.predictions[i]) {
      CHECK(p.size() == rec.partition.bags[i].size());
      for (double v : p) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    for (std::size_t x = 0; x < rec.partition.bags[i].size(); ++x) {
      const auto s = rec.partition.bags[i][x];
      ++seen[s];
      std::size_t votes = 0;
      for (const auto& p : rec.predictions[i]) votes += p[x] > rec.thresholds[i].threshold;
      CHECK(rec.anomalous_votes[s] == votes);
      CHECK(rec.anomalous_votes[s] <= 3);
      CHECK(rec.removed[s] == (votes >= 2));
    }
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("a sample below every threshold is kept") {
  const auto ds = testing::gaussian_dataset(40, 3, 2);
  const auto rec = run_vote(ds, make_config(1, 4), 0);
  for (std::size_t s = 0; s < ds.size(); ++s) {
    if (rec.anomalous_votes[s] == 0) CHECK_FALSE(rec.removed[s]);
  }
}

TEST_CASE("too small for the bag count") {
  const auto ds = testing::gaussian_dataset(7, 2, 3);
  CHECK_THROWS_AS(run_vote(ds, make_config(1, 4), 0), ParameterError);
}

TEST_CASE("planted anomalies are removed and nominals mostly kept") {
  // 40 nominals + 4 points at distance 10. Anomaly-free bags still split their
  // nominal mass, so retention is judged pooled over draws, with 3 votes.
  std::size_t kept_3 = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ds = testing::planted_dataset(40, 4, 8, 10.0, seed);
    for (std::size_t k : {1, 3}) {
      const auto result = baaf_train(ds, make_config(k, 4, BackendConfig::knn(), seed));
      std::set<std::size_t> removed(result.report.removed.begin(), result.report.removed.end());
      for (std::size_t a = 40; a < 44; ++a) CHECK(removed.count(a) == 1);
      if (k == 3) {
        for (std::size_t i : result.report.kept) kept_3 += i < 40;
      }
      // Each planted point outscores every nominal of its bag under every predictor.
      for (const auto& vote : result.report.votes) {
        for (std::size_t i = 0; i < 4; ++i) {
          const auto& bag = vote.partition.bags[i];
          for (const auto& p : vote.predictions[i]) {
            double nominal_max = 0, planted_min = 1;
            for (std::size_t x = 0; x < bag.size(); ++x) {
              if (bag[x] < 40) nominal_max = std::max(nominal_max, p[x]);
              else planted_min = std::min(planted_min, p[x]);
            }
            if (planted_min < 1) CHECK(planted_min > nominal_max);
          }
        }
      }
    }
  }
  CHECK(static_cast<double>(kept_3) / (50.0 * 40.0) >= 0.90);
}

TEST_CASE("disjoint planted anomalies do not mask each other") {
  // Planted points are far from everything including each other, so a model
  // trained on a bag holding one of them still flags the others.
  const auto ds = testing::planted_dataset(60, 6, 6, 12.0, 4);
  const auto rec = run_vote(ds, make_config(1, 4, BackendConfig::knn(), 5), 0);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& bag = rec.partition.bags[i];
    for (std::size_t x = 0; x < bag.size(); ++x) {
      if (bag[x] < 60) continue;
      for (const auto& p : rec.predictions[i]) CHECK(p[x] > rec.thresholds[i].threshold);
    }
  }
}

TEST_CASE("vote aggregation") {
  using V = std::vector<bool>;
  CHECK(aggregate_votes({V{true, false}}) == V{false, true});
  // Sample 0 removed in votes 1 and 3 of 3; sample 1 only in vote 2.
  CHECK(aggregate_votes({V{true, false}, V{false, true}, V{true, false}}) == V{false, true});
  CHECK(aggregate_votes({V{true}, V{false}}) == V{false});
  CHECK_THROWS_AS(aggregate_votes(std::vector<V>{}), ParameterError);
  CHECK_THROWS_AS(aggregate_votes({V{true}, V{true, false}}), Error);
}

TEST_CASE("fit-call count is k*n+1") {
  const auto ds = testing::gaussian_dataset(48, 3, 4);
  for (auto [k, n] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 4}, {3, 4}, {2, 3}, {1, 2}}) {
    std::size_t calls = 0;
    std::size_t rows = 0;
    EngineOptions opts;
    opts.on_fit = [&](std::size_t r) {
      ++calls;
      rows += r;
    };
    const auto result = baaf_train(ds, make_config(k, n), opts);
    CHECK(calls == k * n + 1);
    CHECK(result.report.total_fit_calls == k * n + 1);
    CHECK(rows == k * ds.size() + result.report.kept.size());
  }
}

TEST_CASE("kept and removed partition the samples") {
  const auto ds = testing::planted_dataset(50, 5, 4, 9.0, 6);
  const auto result = baaf_train(ds, make_config(3, 4));
  std::vector<int> seen(ds.size(), 0);
  for (auto i : result.report.kept) ++seen[i];
  for (auto i : result.report.removed) ++seen[i];
  for (int s : seen) CHECK(s == 1);
  CHECK(std::is_sorted(result.report.kept.begin(), result.report.kept.end()));
  CHECK(result.detector.train_sample_count() == result.report.kept.size());
}

TEST_CASE("clean data: smaller bank and near-identical AUROC") {
  SynthConfig sc;
  sc.seed = 3;
  const auto data = synth_generate(sc);
  const auto result = baaf_train(data.train_nominal, make_config(1, 4, BackendConfig::knn(), 3));
  const auto unfiltered = fit(BackendConfig::knn(), data.train_nominal, 0);
  CHECK(std::get<KnnModel>(result.detector.model()).bank.rows() <= data.train_nominal.size());
  // Held-out nominal AUROC: fresh nominals vs anomalies of the test set.
  const auto labels = data.test.labels->aligned(data.test.data);
  std::vector<bool> truth;
  for (auto l : labels) truth.push_back(l == Label::kAnomalous);
  const double a = auroc(result.detector.score_all(data.test.data.features()), truth);
  const double b = auroc(unfiltered.score_all(data.test.data.features()), truth);
  CHECK(std::abs(a - b) <= 0.02);
}

TEST_CASE("identical reports across thread counts, every backend and normalization") {
  const auto ds = testing::planted_dataset(90, 5, 5, 8.0, 7);
  for (auto mode : {NormalizationMode::kGlobal, NormalizationMode::kPerModel}) {
    for (const auto& b : {BackendConfig::knn(2, 0.5), BackendConfig::gaussian(), BackendConfig::pca()}) {
      auto config = make_config(2, 5, b, 11);
      config.normalization = mode;
      std::string ref;
      for (std::size_t t : {1, 2, 8}) {
        EngineOptions opts;
        opts.threads = t;
        const auto text = serialize_report(baaf_train(ds, config, opts).report);
        if (ref.empty()) ref = text;
        CHECK(text == ref);
      }
    }
  }
}

TEST_CASE("inference parity with a direct fit on the kept set") {
  const auto ds = testing::planted_dataset(60, 4, 4, 10.0, 8);
  const auto q = testing::gaussian_dataset(30, 4, 9, 3.0);
  for (const auto& b : {BackendConfig::knn(1, 0.5), BackendConfig::gaussian(), BackendConfig::pca()}) {
    const auto result = baaf_train(ds, make_config(1, 4, b, 2));
    const auto direct = fit(b, ds.features().select(result.report.kept), final_train_seed(2));
    CHECK(result.detector.score_all(q.features()) == direct.score_all(q.features()));
  }
}

TEST_CASE("pipeline is invariant to rescaling the features") {
  // knn raw scores scale linearly; normalization cancels it, so decisions match.
  const auto ds = testing::planted_dataset(60, 4, 4, 10.0, 12);
  std::vector<float> v(ds.features().data().begin(), ds.features().data().end());
  for (auto& x : v) x *= 4.0f;
  const FeatureDataset scaled(ds.ids(), FeatureMatrix(ds.size(), ds.dim(), v));
  for (auto mode : {NormalizationMode::kGlobal, NormalizationMode::kPerModel}) {
    auto config = make_config(3, 4, BackendConfig::knn(), 4);
    config.normalization = mode;
    const auto a = baaf_filter(ds, config);
    const auto b = baaf_filter(scaled, config);
    CHECK(a.kept == b.kept);
    for (std::size_t k = 0; k < a.votes.size(); ++k) {
      CHECK(a.votes[k].anomalous_votes == b.votes[k].anomalous_votes);
    }
  }
}

TEST_CASE("fallback threshold when the bag's predictions are degenerate") {
  const std::vector<double> flat(20, 0.0);
  const auto t = bag_threshold(flat, {});
  CHECK(t.fallback);
  CHECK_FALSE(t.gmm.has_value());
  CHECK(t.threshold == 0.0);
  // mean + 3 sd with weights
  const std::vector<double> v{0.0, 0.5};
  const std::vector<double> w{1.0, 1.0};
  CHECK(fallback_threshold(v, w) == doctest::Approx(0.25 + 3 * 0.25));
}

TEST_CASE("duplicated data gives constant predictions and a flagged fallback, nothing removed") {
  const FeatureDataset same(testing::make_ids(12), FeatureMatrix(12, 2, std::vector<float>(24, 1.0f)));
  const auto result = baaf_train(same, make_config(1, 3));
  CHECK(result.report.votes[0].constant_normalization);
  for (const auto& t : result.report.votes[0].thresholds) CHECK(t.fallback);
  CHECK(result.report.kept.size() == 12);
}

TEST_CASE("all removed refuses to train") {
  FilterReport report;
  report.config = make_config(1, 2);
  report.removed = {0, 1, 2, 3};
  const auto ds = testing::gaussian_dataset(4, 2, 1);
  CHECK_THROWS_AS(train_final(ds, report), DegenerateError);
}

TEST_CASE("report replays to the same decisions") {
  const auto ds = testing::planted_dataset(70, 6, 5, 9.0, 13);
  for (std::size_t k : {1, 2, 3}) {
    const auto result = baaf_train(ds, make_config(k, 4, BackendConfig::knn(), k));
    const auto j = nlohmann::json::parse(serialize_report(result.report));
    CHECK(j["format"] == "baaf-filter-report");
    CHECK(j["total_fit_calls"] == k * 4 + 1);
    const auto kept = replay_filter_decisions(j);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (kept[i]) idx.push_back(i);
    CHECK(idx == result.report.kept);
    CHECK(config_from_json(config_to_json(result.report.config)).name() == result.report.config.name());
  }
}

TEST_CASE("seeds are stable and domain-separated") {
  CHECK(vote_seed(1, 0) == vote_seed(1, 0));
  CHECK(vote_seed(1, 0) != vote_seed(1, 1));
  CHECK(vote_seed(1, 0) != bag_train_seed(1, 0, 0));
  CHECK(final_train_seed(1) != final_train_seed(2));
  // Pinned so a change in derivation is noticed.
  CHECK(derive_seed(0) == 0xE220A8397B1DCDAFull);
}
