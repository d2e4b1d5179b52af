#include "baaf/video.hpp"

#include <algorithm>

#include "baaf/errors.hpp"
#include "baaf/parallel.hpp"

namespace baaf {

std::vector<bool> close_anomaly_mask(const std::vector<bool>& removed, std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw ParameterError("close_anomaly_mask: window must be odd and >= 1, got " +
                         std::to_string(window));
  }
  const std::size_t len = removed.size();
  if (window > len) {
    throw ParameterError("close_anomaly_mask: window " + std::to_string(window) +
                         " exceeds sequence length " + std::to_string(len));
  }
  const auto r = static_cast<std::ptrdiff_t>(window / 2);
  const auto n = static_cast<std::ptrdiff_t>(len);

  // Dilate over [-r, n + r) so the erosion below sees the padded line.
  std::vector<bool> dilated(static_cast<std::size_t>(n + 2 * r), false);
  for (std::ptrdiff_t t = -r; t < n + r; ++t) {
    bool any = false;
    for (std::ptrdiff_t u = std::max<std::ptrdiff_t>(0, t - r); u <= std::min(n - 1, t + r); ++u) {
      if (removed[static_cast<std::size_t>(u)]) {
        any = true;
        break;
      }
    }
    dilated[static_cast<std::size_t>(t + r)] = any;
  }
  std::vector<bool> closed(len, false);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    bool all = true;
    for (std::ptrdiff_t u = t - r; u <= t + r; ++u) {
      if (!dilated[static_cast<std::size_t>(u + r)]) {
        all = false;
        break;
      }
    }
    closed[static_cast<std::size_t>(t)] = all;
  }
  return closed;
}

std::vector<FrameInterval> segment_clip(const std::vector<bool>& removed, std::size_t min_length) {
  std::vector<FrameInterval> out;
  std::size_t t = 0;
  while (t < removed.size()) {
    if (removed[t]) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < removed.size() && !removed[t]) ++t;
    if (t - start >= min_length) out.push_back({start, t - 1});
  }
  return out;
}

VideoFilterResult segment_clips(const FeatureDataset& dataset, const std::vector<bool>& removed,
                                const VideoOptions& options) {
  if (!dataset.has_clips()) throw ParameterError("segment_clips: dataset has no clip structure");
  if (removed.size() != dataset.size()) throw ParameterError("segment_clips: flag count mismatch");

  const auto& spans = dataset.clip_spans();
  VideoFilterResult result;
  result.clips.resize(spans.size());
  parallel_for(spans.size(), 1, [&](std::size_t c) {
    const auto& span = spans[c];
    std::vector<bool> flags(removed.begin() + static_cast<std::ptrdiff_t>(span.begin),
                            removed.begin() + static_cast<std::ptrdiff_t>(span.end));
    // Short clips cannot host the full element; shrink it to the largest odd width that fits.
    std::size_t window = std::min(options.closing_window, flags.size());
    if (window % 2 == 0) --window;
    auto& decision = result.clips[c];
    decision.clip_id = span.clip_id;
    decision.removed = window >= 1 ? close_anomaly_mask(flags, window) : flags;
    decision.kept = segment_clip(decision.removed, options.min_clip_length);
  });

  std::vector<std::string> ids;
  ClipAssignment clips;
  for (std::size_t c = 0; c < spans.size(); ++c) {
    const auto& decision = result.clips[c];
    for (std::size_t k = 0; k < decision.kept.size(); ++k) {
      const auto& iv = decision.kept[k];
      for (std::size_t f = iv.start; f <= iv.end; ++f) {
        const std::size_t sample = spans[c].begin + f;
        result.kept.push_back(sample);
        ids.push_back(dataset.id(sample));
        clips.clip_of.push_back(decision.clip_id + "#" + std::to_string(k));
        clips.frame_index.push_back(dataset.clips()->frame_index[sample]);
      }
    }
  }
  result.filtered = FeatureDataset(std::move(ids), dataset.features().select(result.kept),
                                   std::move(clips));
  return result;
}

VideoBaafResult baaf_train_video(const FeatureDataset& dataset, const BaafConfig& config,
                                 const VideoOptions& video, const EngineOptions& options) {
  if (!dataset.has_clips()) throw ParameterError("baaf_train_video: dataset has no clip structure");
  auto report = baaf_filter(dataset, config, options);
  std::vector<bool> removed(dataset.size(), false);
  for (std::size_t i : report.removed) removed[i] = true;
  auto segmented = segment_clips(dataset, removed, video);

  report.kept = segmented.kept;
  report.removed.clear();
  std::vector<bool> keep(dataset.size(), false);
  for (std::size_t i : report.kept) keep[i] = true;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!keep[i]) report.removed.push_back(i);
  }
  auto detector = train_final(dataset, report, options);
  return {std::move(detector), std::move(report), std::move(segmented)};
}

}  // namespace baaf
