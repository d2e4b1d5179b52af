#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "baaf/backends.hpp"
#include "baaf/dataset.hpp"
#include "baaf/gmm.hpp"

namespace baaf {

/// BAAF(k/n): k votes over n bags. Defaults are BAAF(1/4).
struct BaafConfig {
  std::size_t n_bags = 4;
  std::size_t k_votes = 1;
  BackendConfig backend;
  NormalizationMode normalization = NormalizationMode::kGlobal;
  std::uint64_t master_seed = 0;
  EmOptions em;

  /// "BAAF(k/n)"
  std::string name() const;
  void validate() const;
};

struct EngineOptions {
  std::size_t threads = 1;
  /// Called once per backend fit with the training-set size.
  std::function<void(std::size_t)> on_fit;
};

/// Per-bag threshold decision.
struct BagThreshold {
  std::optional<GmmFit> gmm;  // absent when the fallback rule was used
  double threshold = 0.0;
  bool fallback = false;
  bool clamped = false;
};

/// One split -> fit -> cross-predict -> threshold -> filter pass.
struct VoteRecord {
  std::size_t vote_index = 0;
  BagPartition partition;
  std::vector<BagThreshold> thresholds;  // one per bag
  /// predictors[i]: the models j != i that judged bag i, ascending.
  std::vector<std::vector<std::size_t>> predictors;
  /// predictions[i][s][x]: normalized score of the x-th member of bag i under
  /// model predictors[i][s].
  std::vector<std::vector<std::vector<double>>> predictions;
  std::vector<std::size_t> anomalous_votes;  // per sample, dataset order
  std::vector<bool> removed;                 // per sample, dataset order
  std::size_t fit_call_count = 0;
  bool constant_normalization = false;
};

struct FilterEvaluation {
  std::optional<double> precision;
  std::optional<double> recall;
};

struct FilterReport {
  BaafConfig config;
  std::vector<std::string> sample_ids;
  std::vector<VoteRecord> votes;
  std::vector<std::size_t> kept;     // dataset indices, ascending
  std::vector<std::size_t> removed;  // dataset indices, ascending
  std::size_t total_fit_calls = 0;
  std::uint64_t final_train_seed = 0;
  std::optional<FilterEvaluation> evaluation;
};

struct BaafResult {
  TrainedDetector detector;
  FilterReport report;
};

/// Strict majority of `voters` predictors flagged the sample.
constexpr bool majority_anomalous(std::size_t anomalous_votes, std::size_t voters) {
  return 2 * anomalous_votes > voters;
}

/// Seeds used by the engine, exposed so callers can reproduce individual fits.
std::uint64_t vote_seed(std::uint64_t master, std::size_t vote_index);
std::uint64_t bag_train_seed(std::uint64_t master, std::size_t vote_index, std::size_t bag);
std::uint64_t final_train_seed(std::uint64_t master);

/// Weighted mean + 3 weighted standard deviations; used when a bag's GMM is degenerate.
double fallback_threshold(std::span<const double> values, std::span<const double> weights);

/// Per-bag threshold from pooled normalized predictions (GMM crossover, or fallback).
BagThreshold bag_threshold(std::span<const double> pooled, const EmOptions& em);

VoteRecord run_vote(const FeatureDataset& dataset, const BaafConfig& config,
                    std::size_t vote_index, const EngineOptions& options = {});

/// Kept mask: a sample is kept iff it survived a strict majority of votes;
/// ties remove.
std::vector<bool> aggregate_votes(std::span<const VoteRecord> records);
std::vector<bool> aggregate_votes(const std::vector<std::vector<bool>>& removed_per_vote);

/// Runs all K votes and aggregates them; no final training. The report's
/// total_fit_calls is k * n at this point.
FilterReport baaf_filter(const FeatureDataset& dataset, const BaafConfig& config,
                         const EngineOptions& options = {});

/// Fits the final detector on report.kept and bumps report.total_fit_calls.
/// Throws DegenerateError when nothing was kept.
TrainedDetector train_final(const FeatureDataset& dataset, FilterReport& report,
                            const EngineOptions& options = {});

/// Runs all votes, aggregates, and trains the final detector on the kept set.
BaafResult baaf_train(const FeatureDataset& dataset, const BaafConfig& config,
                      const EngineOptions& options = {});

}  // namespace baaf
