#include "baaf/engine.hpp"

#include <atomic>
#include <cmath>
#include <memory>

#include "baaf/errors.hpp"
#include "baaf/parallel.hpp"
#include "baaf/rng.hpp"

namespace baaf {

namespace {

// Seed domains keep vote, bag and final seeds from colliding.
constexpr std::uint64_t kVoteDomain = 1;
constexpr std::uint64_t kBagDomain = 2;
constexpr std::uint64_t kFinalDomain = 3;

class FitCounter {
 public:
  explicit FitCounter(const EngineOptions& options) : options_(options) {}

  TrainedDetector fit(const BackendConfig& backend, const FeatureMatrix& train, std::uint64_t seed) {
    count_.fetch_add(1);
    if (options_.on_fit) {
      std::lock_guard lock(mutex_);
      options_.on_fit(train.rows());
    }
    return baaf::fit(backend, train, seed);
  }
  std::size_t count() const { return count_.load(); }

 private:
  const EngineOptions& options_;
  std::atomic<std::size_t> count_{0};
  std::mutex mutex_;
};

VoteRecord run_vote_impl(const FeatureDataset& dataset, const BaafConfig& config,
                         std::size_t vote_index, const EngineOptions& options,
                         FitCounter& counter) {
  const std::size_t n = config.n_bags;
  if (dataset.size() < 2 * n) {
    throw ParameterError("run_vote: " + std::to_string(dataset.size()) + " samples is too few for " +
                         std::to_string(n) + " bags (need >= " + std::to_string(2 * n) + ")");
  }
  VoteRecord record;
  record.vote_index = vote_index;
  record.partition = random_split(dataset, n, vote_seed(config.master_seed, vote_index));
  const auto& bags = record.partition.bags;

  std::vector<std::unique_ptr<TrainedDetector>> models(n);
  const std::size_t before = counter.count();
  parallel_for(n, options.threads, [&](std::size_t j) {
    const auto train = dataset.features().select(bags[j]);
    models[j] = std::make_unique<TrainedDetector>(
        counter.fit(config.backend, train, bag_train_seed(config.master_seed, vote_index, j)));
  });
  record.fit_call_count = counter.count() - before;

  // raw[i][j][x]: model j on member x of bag i (j != i; raw[i][i] stays empty).
  std::vector<std::vector<std::vector<double>>> raw(n, std::vector<std::vector<double>>(n));
  parallel_for(n * n, options.threads, [&](std::size_t task) {
    const std::size_t i = task / n;
    const std::size_t j = task % n;
    if (i == j) return;
    auto& out = raw[i][j];
    out.reserve(bags[i].size());
    for (std::size_t x : bags[i]) out.push_back(models[j]->score(dataset.row(x)));
  });

  // One normalization group per model: everything model j predicted.
  std::vector<std::vector<double>> groups(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) groups[j].insert(groups[j].end(), raw[i][j].begin(), raw[i][j].end());
    }
  }
  auto normalized = normalize_scores(groups, config.normalization);
  record.constant_normalization = normalized.constant_group;

  record.predictors.resize(n);
  record.predictions.resize(n);
  {
    std::vector<std::size_t> offset(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto& g = normalized.groups[j];
        const auto begin = g.begin() + static_cast<std::ptrdiff_t>(offset[j]);
        record.predictors[i].push_back(j);
        record.predictions[i].emplace_back(begin, begin + static_cast<std::ptrdiff_t>(bags[i].size()));
        offset[j] += bags[i].size();
      }
    }
  }

  record.thresholds.resize(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    std::vector<double> pooled;
    for (const auto& p : record.predictions[i]) pooled.insert(pooled.end(), p.begin(), p.end());
    record.thresholds[i] = bag_threshold(pooled, config.em);
  });

  record.anomalous_votes.assign(dataset.size(), 0);
  record.removed.assign(dataset.size(), false);
  const std::size_t voters = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = record.thresholds[i].threshold;
    for (std::size_t x = 0; x < bags[i].size(); ++x) {
      std::size_t votes = 0;
      for (const auto& p : record.predictions[i]) votes += p[x] > t ? 1 : 0;
      const std::size_t sample = bags[i][x];
      record.anomalous_votes[sample] = votes;
      record.removed[sample] = majority_anomalous(votes, voters);
    }
  }
  return record;
}

}  // namespace

std::string BaafConfig::name() const {
  return "BAAF(" + std::to_string(k_votes) + "/" + std::to_string(n_bags) + ")";
}

void BaafConfig::validate() const {
  if (n_bags < 2) throw ParameterError("BAAF: need at least 2 bags, got " + std::to_string(n_bags));
  if (k_votes < 1) throw ParameterError("BAAF: need at least 1 vote");
  if (em.max_iterations < 1 || !(em.tolerance > 0.0) || !(em.variance_floor > 0.0)) {
    throw ParameterError("BAAF: invalid EM options");
  }
  backend.validate();
}

std::uint64_t vote_seed(std::uint64_t master, std::size_t vote_index) {
  return derive_seed(master, kVoteDomain, vote_index);
}

std::uint64_t bag_train_seed(std::uint64_t master, std::size_t vote_index, std::size_t bag) {
  return derive_seed(master, kBagDomain, vote_index, bag);
}

std::uint64_t final_train_seed(std::uint64_t master) { return derive_seed(master, kFinalDomain); }

double fallback_threshold(std::span<const double> values, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> uniform;
  if (!(total > 0.0)) {
    uniform.assign(values.size(), 1.0);
    weights = uniform;
    total = static_cast<double>(values.size());
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) mean += weights[i] * values[i];
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    var += weights[i] * (values[i] - mean) * (values[i] - mean);
  }
  return mean + 3.0 * std::sqrt(var / total);
}

BagThreshold bag_threshold(std::span<const double> pooled, const EmOptions& em) {
  std::vector<double> weights(pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) weights[k] = 1.0 - pooled[k];
  BagThreshold out;
  try {
    auto gmm = fit_weighted_gmm(pooled, weights, em);
    out.threshold = gmm.threshold;
    out.clamped = gmm.threshold_clamped;
    out.gmm = std::move(gmm);
  } catch (const DegenerateError&) {
    out.fallback = true;
    out.threshold = fallback_threshold(pooled, weights);
  } catch (const ParameterError&) {
    // Too few values or zero total weight: same fallback.
    out.fallback = true;
    out.threshold = fallback_threshold(pooled, weights);
  }
  return out;
}

VoteRecord run_vote(const FeatureDataset& dataset, const BaafConfig& config,
                    std::size_t vote_index, const EngineOptions& options) {
  config.validate();
  FitCounter counter(options);
  return run_vote_impl(dataset, config, vote_index, options, counter);
}

std::vector<bool> aggregate_votes(const std::vector<std::vector<bool>>& removed_per_vote) {
  if (removed_per_vote.empty()) throw ParameterError("aggregate_votes: no votes");
  const std::size_t samples = removed_per_vote.front().size();
  for (const auto& v : removed_per_vote) {
    if (v.size() != samples) throw Error("aggregate_votes: votes cover different sample sets");
  }
  const std::size_t k = removed_per_vote.size();
  std::vector<bool> kept(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t kept_votes = 0;
    for (const auto& v : removed_per_vote) kept_votes += v[s] ? 0 : 1;
    kept[s] = 2 * kept_votes > k;
  }
  return kept;
}

std::vector<bool> aggregate_votes(std::span<const VoteRecord> records) {
  std::vector<std::vector<bool>> removed;
  removed.reserve(records.size());
  for (const auto& r : records) removed.push_back(r.removed);
  return aggregate_votes(removed);
}

namespace {

FilterReport filter_impl(const FeatureDataset& dataset, const BaafConfig& config,
                         const EngineOptions& options, FitCounter& counter) {
  FilterReport report;
  report.config = config;
  report.sample_ids = dataset.ids();
  for (std::size_t k = 0; k < config.k_votes; ++k) {
    report.votes.push_back(run_vote_impl(dataset, config, k, options, counter));
  }
  const auto kept = aggregate_votes(report.votes);
  for (std::size_t s = 0; s < kept.size(); ++s) (kept[s] ? report.kept : report.removed).push_back(s);
  report.final_train_seed = final_train_seed(config.master_seed);
  report.total_fit_calls = counter.count();
  return report;
}

}  // namespace

FilterReport baaf_filter(const FeatureDataset& dataset, const BaafConfig& config,
                         const EngineOptions& options) {
  config.validate();
  FitCounter counter(options);
  return filter_impl(dataset, config, options, counter);
}

TrainedDetector train_final(const FeatureDataset& dataset, FilterReport& report,
                            const EngineOptions& options) {
  if (report.kept.empty()) {
    throw DegenerateError("baaf_train: every sample was filtered out; refusing to train on nothing");
  }
  FitCounter counter(options);
  auto detector = counter.fit(report.config.backend, dataset.features().select(report.kept),
                              report.final_train_seed);
  report.total_fit_calls += counter.count();
  return detector;
}

BaafResult baaf_train(const FeatureDataset& dataset, const BaafConfig& config,
                      const EngineOptions& options) {
  auto report = baaf_filter(dataset, config, options);
  auto detector = train_final(dataset, report, options);
  return {std::move(detector), std::move(report)};
}

}  // namespace baaf
