#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "baaf/engine.hpp"
#include "baaf/synth.hpp"

namespace baaf {

/// Corruption sweep over rates x seeds on synthetic data.
struct SweepConfig {
  SynthConfig synth{16, 360, 200, 250, 4.0, 6.0, 0};
  BaafConfig baaf = [] {
    BaafConfig c;
    c.n_bags = 6;
    c.k_votes = 3;
    return c;
  }();
  std::vector<double> rates{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<std::uint64_t> seeds{0};
  CorruptionSpec corruption;  // rate and seed are set per cell
  std::size_t threads = 1;
  std::size_t histogram_bins = 20;
};

struct MetricsRow {
  std::string config;
  std::uint64_t seed = 0;
  double rate = 0.0;
  double i_auroc_filtered = 0.0;
  double i_auroc_unfiltered = 0.0;
  double i_auroc_clean = 0.0;
  std::optional<double> filter_precision;
  std::optional<double> filter_recall;
  std::size_t fit_calls = 0;
  std::size_t injected = 0;
  std::size_t removed = 0;
};

/// Per-bag GMM parameters plus a histogram of its pooled predictions on [0, 1].
struct GmmDump {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t vote = 0;
  std::size_t bag = 0;
  BagThreshold threshold;
  std::vector<std::size_t> histogram;
};

struct CellResult {
  MetricsRow row;
  FilterReport report;
};

/// One (seed, rate) cell on already generated data.
CellResult run_cell(const SynthData& data, const SweepConfig& config, double rate,
                    std::uint64_t seed, std::size_t rate_index);

struct SweepResult {
  std::vector<MetricsRow> rows;
  std::vector<GmmDump> dumps;
};

SweepResult run_sweep(const SweepConfig& config);

std::vector<GmmDump> gmm_dumps(const FilterReport& report, double rate, std::uint64_t seed,
                               std::size_t bins);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::string gmm_params_to_csv(const std::vector<GmmDump>& dumps);
/// Long format: one line per (dump, bin) with both fitted component densities at the bin center.
std::string gmm_histogram_to_csv(const std::vector<GmmDump>& dumps);

}  // namespace baaf
