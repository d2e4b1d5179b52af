#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "baaf/engine.hpp"

namespace baaf {

inline constexpr int kFilterReportVersion = 1;

nlohmann::json config_to_json(const BaafConfig& config);
BaafConfig config_from_json(const nlohmann::json& j);

nlohmann::json gmm_to_json(const GmmFit& fit);

/// Versioned JSON form of a FilterReport: every partition, GMM parameter,
/// threshold, normalized prediction, vote count and decision.
nlohmann::json report_to_json(const FilterReport& report);

/// Canonical text form (stable across runs and thread counts).
std::string serialize_report(const FilterReport& report);

/// Recomputes thresholds, per-vote decisions and the final kept mask from
/// the serialized predictions alone. Returns the kept mask in sample order.
std::vector<bool> replay_filter_decisions(const nlohmann::json& report);

}  // namespace baaf
