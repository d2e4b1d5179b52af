#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "baaf/dataset.hpp"

namespace baaf {

enum class BackendKind : std::uint8_t {
  kKnnMemoryBank = 1,
  kGaussianMahalanobis = 2,
  kPcaReconstruction = 3,
};

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& name);

struct KnnParams {
  std::size_t k_neighbors = 1;
  double coreset_fraction = 1.0;  // (0, 1]
};

struct GaussianParams {
  double shrinkage = 0.01;  // [0, 1]
};

struct PcaParams {
  double variance_kept = 0.95;  // (0, 1)
};

/// Which one-class detector to train, with exactly one active parameter block.
struct BackendConfig {
  std::variant<KnnParams, GaussianParams, PcaParams> params = KnnParams{};

  BackendKind kind() const;
  /// Throws ParameterError when the active block is out of range.
  void validate() const;

  static BackendConfig knn(std::size_t k = 1, double coreset_fraction = 1.0) {
    return {KnnParams{k, coreset_fraction}};
  }
  static BackendConfig gaussian(double shrinkage = 0.01) { return {GaussianParams{shrinkage}}; }
  static BackendConfig pca(double variance_kept = 0.95) { return {PcaParams{variance_kept}}; }
};

struct KnnModel {
  std::size_t k_neighbors = 1;
  FeatureMatrix bank;
};

struct GaussianModel {
  std::vector<float> mean;
  std::vector<float> whitening;  // d x d row-major, lower triangular: L^-1 of the shrunk covariance
};

struct PcaModel {
  std::vector<float> mean;
  FeatureMatrix basis;  // components x d, orthonormal rows
};

/// A fitted one-class detector. Immutable; score() is pure and thread-safe.
class TrainedDetector {
 public:
  using Model = std::variant<KnnModel, GaussianModel, PcaModel>;

  TrainedDetector(Model model, std::size_t dim, std::size_t train_sample_count);

  BackendKind kind() const;
  std::size_t dim() const { return dim_; }
  std::size_t train_sample_count() const { return train_sample_count_; }
  const Model& model() const { return model_; }

  /// Raw anomaly score (>= 0, higher = more anomalous).
  double score(std::span<const float> query) const;
  std::vector<double> score_all(const FeatureMatrix& queries) const;

  /// Versioned little-endian binary blob; from_blob(to_blob()) scores bit-identically.
  std::vector<std::uint8_t> to_blob() const;
  static TrainedDetector from_blob(std::span<const std::uint8_t> blob);

 private:
  Model model_;
  std::size_t dim_ = 0;
  std::size_t train_sample_count_ = 0;
};

/// Fits one detector. Deterministic in (config, row order, seed).
TrainedDetector fit(const BackendConfig& config, const FeatureMatrix& train, std::uint64_t seed);
inline TrainedDetector fit(const BackendConfig& config, const FeatureDataset& train,
                           std::uint64_t seed) {
  return fit(config, train.features(), seed);
}

/// Greedy k-center selection of ceil(fraction * rows) row indices, in pick
/// order. The first pick is random unless forced.
std::vector<std::size_t> coreset_indices(const FeatureMatrix& bank, double fraction,
                                         std::uint64_t seed,
                                         std::optional<std::size_t> first_pick = std::nullopt);

FeatureMatrix coreset_subsample(const FeatureMatrix& bank, double fraction, std::uint64_t seed,
                                std::optional<std::size_t> first_pick = std::nullopt);

}  // namespace baaf
