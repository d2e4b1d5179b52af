#include "baaf/synth.hpp"

#include <cmath>
#include <unordered_set>

#include "baaf/errors.hpp"
#include "baaf/rng.hpp"

namespace baaf {

namespace {

constexpr std::size_t kMaxRejections = 1'000'000;

std::string padded(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

}  // namespace

void SynthConfig::validate() const {
  if (dim < 1) throw ParameterError("synth: dim must be >= 1");
  if (n_nominal < 1) throw ParameterError("synth: need at least one training nominal");
  if (!(reject_radius >= 0.0) || !(box_half_width > 0.0)) {
    throw ParameterError("synth: radii must be non-negative and the box non-empty");
  }
}

SynthData synth_generate(const SynthConfig& config) {
  config.validate();
  // Independent streams so changing one count does not reshuffle the others.
  Rng train_rng(derive_seed(config.seed, 1));
  Rng test_rng(derive_seed(config.seed, 2));
  Rng anomaly_rng(derive_seed(config.seed, 3));
  const std::size_t d = config.dim;

  auto gaussian_rows = [d](Rng& rng, std::size_t rows) {
    std::vector<float> v(rows * d);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
  };

  std::vector<std::string> train_ids;
  for (std::size_t i = 0; i < config.n_nominal; ++i) train_ids.push_back("train-n" + padded(i));
  FeatureDataset train(std::move(train_ids),
                       FeatureMatrix(config.n_nominal, d, gaussian_rows(train_rng, config.n_nominal)));

  std::vector<std::string> test_ids;
  std::vector<float> test_values = gaussian_rows(test_rng, config.n_test_nominal);
  EvalLabels labels;
  for (std::size_t i = 0; i < config.n_test_nominal; ++i) {
    test_ids.push_back("test-n" + padded(i));
    labels.set(test_ids.back(), Label::kNominal);
  }
  const double r2 = config.reject_radius * config.reject_radius;
  std::vector<double> point(d);
  for (std::size_t a = 0; a < config.n_anomaly; ++a) {
    std::size_t attempts = 0;
    while (true) {
      if (++attempts > kMaxRejections) {
        throw Error("synth: rejection sampling exceeded " + std::to_string(kMaxRejections) +
                    " attempts");
      }
      double norm2 = 0.0;
      for (auto& x : point) {
        x = anomaly_rng.uniform(-config.box_half_width, config.box_half_width);
        norm2 += x * x;
      }
      // Check on the stored f32 values so the invariant holds for what is written out.
      double stored2 = 0.0;
      for (double x : point) {
        const double f = static_cast<float>(x);
        stored2 += f * f;
      }
      if (norm2 >= r2 && stored2 >= r2) break;
    }
    for (double x : point) test_values.push_back(static_cast<float>(x));
    test_ids.push_back("test-a" + padded(a));
    labels.set(test_ids.back(), Label::kAnomalous);
  }
  const std::size_t test_rows = config.n_test_nominal + config.n_anomaly;
  LabeledDataset test{FeatureDataset(std::move(test_ids), FeatureMatrix(test_rows, d, std::move(test_values))),
                      std::move(labels)};
  return {std::move(train), std::move(test)};
}

void CorruptionSpec::validate() const {
  if (!(rate >= 0.0 && rate < 0.5)) throw ParameterError("corruption: rate must be in [0, 0.5)");
  if (duplicate_group < 1) throw ParameterError("corruption: duplicate_group must be >= 1");
  if (!(duplicate_jitter >= 0.0)) throw ParameterError("corruption: jitter must be >= 0");
}

std::size_t CorruptionSpec::injected_count(std::size_t train_size) const {
  const double n = static_cast<double>(train_size);
  const double a = convention == RateConvention::kFractionOfFinal ? rate * n / (1.0 - rate) : rate * n;
  // Nudge before rounding so products like 0.1 * 90 / 0.9 land on the intended integer.
  return static_cast<std::size_t>(std::llround(a + 1e-9));
}

CorruptedTrain inject_corruption(const FeatureDataset& train, const LabeledDataset& pool,
                                 const CorruptionSpec& spec) {
  spec.validate();
  if (!pool.labels) throw ParameterError("inject_corruption: pool has no labels");
  if (pool.data.dim() != train.dim() && pool.data.size() > 0) {
    throw ParameterError("inject_corruption: pool dimension differs from train");
  }
  const std::size_t count = spec.injected_count(train.size());
  CorruptedTrain out;
  if (count == 0) {
    EvalLabels labels;
    for (const auto& id : train.ids()) labels.set(id, Label::kNominal);
    out.train = {train, std::move(labels)};
    return out;
  }

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool.data.size(); ++i) {
    if (pool.labels->is_anomalous(pool.data.id(i))) candidates.push_back(i);
  }
  const std::size_t draws = (count + spec.duplicate_group - 1) / spec.duplicate_group;
  if (draws > candidates.size()) {
    throw ParameterError("inject_corruption: need " + std::to_string(draws) +
                         " pool anomalies, only " + std::to_string(candidates.size()) + " available");
  }
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(candidates));
  candidates.resize(draws);

  std::vector<std::string> ids = train.ids();
  std::vector<float> values(train.features().data().begin(), train.features().data().end());
  EvalLabels labels;
  for (const auto& id : train.ids()) labels.set(id, Label::kNominal);
  for (std::size_t k = 0; k < draws && out.injected_ids.size() < count; ++k) {
    const std::size_t src = candidates[k];
    const auto& base_id = pool.data.id(src);
    const auto row = pool.data.row(src);
    out.drawn_pool_ids.push_back(base_id);
    for (std::size_t copy = 0; copy < spec.duplicate_group && out.injected_ids.size() < count; ++copy) {
      std::string id = copy == 0 ? base_id : base_id + "~dup" + std::to_string(copy);
      for (float x : row) {
        values.push_back(copy == 0 ? x : static_cast<float>(x + spec.duplicate_jitter * rng.normal()));
      }
      ids.push_back(id);
      labels.set(id, Label::kAnomalous);
      out.injected_ids.push_back(std::move(id));
    }
  }
  const std::size_t rows = ids.size();
  out.train = {FeatureDataset(std::move(ids), FeatureMatrix(rows, train.dim(), std::move(values))),
               std::move(labels)};
  return out;
}

LabeledDataset evaluation_test_set(const LabeledDataset& test, const CorruptedTrain& corrupted,
                                   CorruptionMode mode) {
  if (mode == CorruptionMode::kOverlapping) return test;
  std::unordered_set<std::string> drop(corrupted.drawn_pool_ids.begin(), corrupted.drawn_pool_ids.end());
  std::vector<std::size_t> keep;
  EvalLabels labels;
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    const auto& id = test.data.id(i);
    if (drop.contains(id)) continue;
    keep.push_back(i);
    if (test.labels) labels.set(id, *test.labels->get(id));
  }
  LabeledDataset out{test.data.subset(keep), std::nullopt};
  if (test.labels) out.labels = std::move(labels);
  return out;
}

}  // namespace baaf
