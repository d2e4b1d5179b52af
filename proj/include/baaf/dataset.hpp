#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace baaf {

/// Dense row-major matrix of f32 feature vectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const float> data() const { return data_; }

  /// Rows at the given indices, in the given order.
  FeatureMatrix select(std::span<const std::size_t> indices) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Clip membership for video datasets. Parallel to the sample order.
struct ClipAssignment {
  std::vector<std::string> clip_of;
  std::vector<std::int64_t> frame_index;

  friend bool operator==(const ClipAssignment&, const ClipAssignment&) = default;
};

/// A contiguous run of samples belonging to one clip.
struct ClipSpan {
  std::string clip_id;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
};

/// Immutable, validated set of feature vectors with unique ids. Carries no
/// ground-truth labels; those live in EvalLabels.
class FeatureDataset {
 public:
  FeatureDataset() = default;
  FeatureDataset(std::vector<std::string> ids, FeatureMatrix features,
                 std::optional<ClipAssignment> clips = std::nullopt);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return features_.dim(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const FeatureMatrix& features() const { return features_; }
  std::span<const float> row(std::size_t i) const { return features_.row(i); }

  bool has_clips() const { return clips_.has_value(); }
  const std::optional<ClipAssignment>& clips() const { return clips_; }
  /// Clip runs in dataset order. Empty when the dataset has no clips.
  const std::vector<ClipSpan>& clip_spans() const { return clip_spans_; }

  std::optional<std::size_t> index_of(const std::string& id) const;

  /// New dataset holding the given rows (ascending order keeps clips valid).
  FeatureDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
    return a.ids_ == b.ids_ && a.features_ == b.features_ && a.clips_ == b.clips_;
  }

 private:
  std::vector<std::string> ids_;
  FeatureMatrix features_;
  std::optional<ClipAssignment> clips_;
  std::vector<ClipSpan> clip_spans_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Label : std::uint8_t { kNominal = 0, kAnomalous = 1 };

/// Evaluation-only ground truth keyed by sample id.
class EvalLabels {
 public:
  EvalLabels() = default;
  explicit EvalLabels(std::unordered_map<std::string, Label> labels)
      : labels_(std::move(labels)) {}

  void set(const std::string& id, Label label) { labels_[id] = label; }
  std::optional<Label> get(const std::string& id) const;
  bool is_anomalous(const std::string& id) const {
    return get(id) == Label::kAnomalous;
  }
  std::size_t size() const { return labels_.size(); }
  const std::unordered_map<std::string, Label>& map() const { return labels_; }

  /// Labels in dataset order; throws ValidationError when a sample is missing.
  std::vector<Label> aligned(const FeatureDataset& dataset) const;

  friend bool operator==(const EvalLabels&, const EvalLabels&) = default;

 private:
  std::unordered_map<std::string, Label> labels_;
};

/// What a manifest resolves to: the engine-visible dataset plus, optionally,
/// the hidden labels.
struct LabeledDataset {
  FeatureDataset data;
  std::optional<EvalLabels> labels;

  /// Throws ValidationError unless labels cover exactly the dataset's ids.
  void validate() const;
};

enum class PayloadFormat { kCsv, kF32le };

/// Reads a JSON manifest and its payload files.
LabeledDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest + feature payload (+ labels/clips files when present).
/// Payload files are placed next to the manifest, named after its stem.
void write_dataset(const LabeledDataset& dataset,
                   const std::filesystem::path& manifest_path,
                   PayloadFormat format = PayloadFormat::kF32le);

/// Disjoint, exhaustive split of sample indices into n bags.
struct BagPartition {
  std::vector<std::vector<std::size_t>> bags;  // each sorted ascending
  std::uint64_t seed = 0;

  std::size_t n() const { return bags.size(); }
  /// bag index for every sample, in dataset order.
  std::vector<std::size_t> bag_of(std::size_t sample_count) const;

  friend bool operator==(const BagPartition&, const BagPartition&) = default;
};

/// Uniformly random balanced partition. Clips are the unit of assignment for
/// clip datasets. Deterministic in (dataset order, n, seed).
BagPartition random_split(const FeatureDataset& dataset, std::size_t n,
                          std::uint64_t seed);

}  // namespace baaf
