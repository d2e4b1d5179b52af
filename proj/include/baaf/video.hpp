#pragma once

#include <string>
#include <vector>

#include "baaf/dataset.hpp"
#include "baaf/engine.hpp"

namespace baaf {

/// Inclusive frame range [start, end] within a clip.
struct FrameInterval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

struct ClipDecision {
  std::string clip_id;
  std::vector<bool> removed;          // per frame, after closing
  std::vector<FrameInterval> kept;    // disjoint, ordered, each >= min length
};

/// 1-D morphological closing (dilation then erosion) of the anomalous-frame
/// mask with a centered element of odd width. Evaluated as on an infinite,
/// zero-padded line, so it is extensive and idempotent.
std::vector<bool> close_anomaly_mask(const std::vector<bool>& removed, std::size_t window);

/// Maximal runs of kept frames with length >= min_length.
std::vector<FrameInterval> segment_clip(const std::vector<bool>& removed, std::size_t min_length = 5);

struct VideoOptions {
  std::size_t closing_window = 3;
  std::size_t min_clip_length = 5;
};

struct VideoFilterResult {
  std::vector<ClipDecision> clips;
  std::vector<std::size_t> kept;  // dataset indices, ascending
  /// Kept frames with every sub-clip as its own clip ("<clip>#<k>").
  FeatureDataset filtered;
};

/// Applies closing and segmentation clip by clip to per-sample removal flags.
VideoFilterResult segment_clips(const FeatureDataset& dataset, const std::vector<bool>& removed,
                                const VideoOptions& options = {});

struct VideoBaafResult {
  TrainedDetector detector;
  FilterReport report;  // kept/removed reflect the post-processed frame set
  VideoFilterResult video;
};

/// Frame-level BAAF over clip-atomic bags, followed by closing and
/// segmentation; the final detector trains on the surviving frames.
VideoBaafResult baaf_train_video(const FeatureDataset& dataset, const BaafConfig& config,
                                 const VideoOptions& video = {}, const EngineOptions& options = {});

}  // namespace baaf
