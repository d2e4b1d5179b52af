#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baaf/dataset.hpp"

namespace baaf {

/// Nominals ~ N(0, I_d); anomalies uniform on [-box, box]^d, rejected while
/// their Mahalanobis distance to the nominal center is below reject_radius.
struct SynthConfig {
  std::size_t dim = 8;
  std::size_t n_nominal = 200;       // training nominals
  std::size_t n_test_nominal = 50;   // fresh nominals in the test set
  std::size_t n_anomaly = 50;        // test anomalies, also the corruption pool
  double reject_radius = 4.0;
  double box_half_width = 6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  FeatureDataset train_nominal;
  LabeledDataset test;  // nominals first, then anomalies
};

/// Throws ParameterError on invalid config and Error when rejection sampling
/// exceeds one million attempts for a single anomaly.
SynthData synth_generate(const SynthConfig& config);

enum class CorruptionMode { kOverlapping, kNonOverlapping };

enum class RateConvention {
  kFractionOfFinal,    // rate = anomalies / (nominals + anomalies)
  kFractionOfNominal,  // rate = anomalies / nominals
};

struct CorruptionSpec {
  double rate = 0.0;  // [0, 0.5)
  CorruptionMode mode = CorruptionMode::kOverlapping;
  RateConvention convention = RateConvention::kFractionOfFinal;
  /// 1 = i.i.d. draws. g > 1 = each drawn anomaly plus g-1 jittered copies.
  std::size_t duplicate_group = 1;
  double duplicate_jitter = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t injected_count(std::size_t train_size) const;
};

struct CorruptedTrain {
  /// Corrupted training set; labels mark the injected samples (hidden truth).
  LabeledDataset train;
  std::vector<std::string> injected_ids;
  /// Pool samples that were drawn (equal to injected_ids for i.i.d. mode).
  std::vector<std::string> drawn_pool_ids;
};

/// Appends anomalies drawn without replacement from the anomalous samples of
/// `pool`. Throws ParameterError when the pool is too small.
CorruptedTrain inject_corruption(const FeatureDataset& train, const LabeledDataset& pool,
                                 const CorruptionSpec& spec);

/// The test set the corruption mode calls for: unchanged when overlapping,
/// without the drawn anomalies otherwise.
LabeledDataset evaluation_test_set(const LabeledDataset& test, const CorruptedTrain& corrupted,
                                   CorruptionMode mode);

}  // namespace baaf
