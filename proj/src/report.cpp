#include "baaf/report.hpp"

#include "baaf/errors.hpp"

namespace baaf {

using json = nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json backend_to_json(const BackendConfig& backend) {
  json j;
  j["kind"] = to_string(backend.kind());
  if (const auto* p = std::get_if<KnnParams>(&backend.params)) {
    j["k_neighbors"] = p->k_neighbors;
    j["coreset_fraction"] = p->coreset_fraction;
  } else if (const auto* p = std::get_if<GaussianParams>(&backend.params)) {
    j["shrinkage"] = p->shrinkage;
  } else if (const auto* p = std::get_if<PcaParams>(&backend.params)) {
    j["variance_kept"] = p->variance_kept;
  }
  return j;
}

BackendConfig backend_from_json(const json& j) {
  switch (backend_kind_from_string(j.at("kind").get<std::string>())) {
    case BackendKind::kKnnMemoryBank:
      return BackendConfig::knn(j.value("k_neighbors", std::size_t{1}),
                                j.value("coreset_fraction", 1.0));
    case BackendKind::kGaussianMahalanobis:
      return BackendConfig::gaussian(j.value("shrinkage", 0.01));
    case BackendKind::kPcaReconstruction:
      return BackendConfig::pca(j.value("variance_kept", 0.95));
  }
  throw ParameterError("unknown backend");
}

}  // namespace

json config_to_json(const BaafConfig& config) {
  return json{
      {"name", config.name()},
      {"n_bags", config.n_bags},
      {"k_votes", config.k_votes},
      {"backend", backend_to_json(config.backend)},
      {"normalization", config.normalization == NormalizationMode::kGlobal ? "global" : "per-model"},
      {"master_seed", config.master_seed},
      {"em",
       {{"tolerance", config.em.tolerance},
        {"max_iterations", config.em.max_iterations},
        {"variance_floor", config.em.variance_floor}}},
  };
}

BaafConfig config_from_json(const json& j) {
  BaafConfig c;
  c.n_bags = j.at("n_bags").get<std::size_t>();
  c.k_votes = j.at("k_votes").get<std::size_t>();
  c.backend = backend_from_json(j.at("backend"));
  const auto norm = j.value("normalization", std::string("global"));
  if (norm == "global") {
    c.normalization = NormalizationMode::kGlobal;
  } else if (norm == "per-model" || norm == "per_model") {
    c.normalization = NormalizationMode::kPerModel;
  } else {
    throw ParameterError("unknown normalization '" + norm + "'");
  }
  c.master_seed = j.value("master_seed", std::uint64_t{0});
  if (j.contains("em")) {
    const auto& em = j["em"];
    c.em.tolerance = em.value("tolerance", c.em.tolerance);
    c.em.max_iterations = em.value("max_iterations", c.em.max_iterations);
    c.em.variance_floor = em.value("variance_floor", c.em.variance_floor);
  }
  return c;
}

json gmm_to_json(const GmmFit& fit) {
  json comps = json::array();
  for (const auto& c : fit.components) {
    comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
  }
  return json{{"components", comps},
              {"threshold", fit.threshold},
              {"threshold_clamped", fit.threshold_clamped},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"final_weighted_loglik", fit.final_weighted_loglik}};
}

json report_to_json(const FilterReport& report) {
  json j;
  j["format"] = "baaf-filter-report";
  j["version"] = kFilterReportVersion;
  j["config"] = config_to_json(report.config);
  j["samples"] = report.sample_ids;

  json votes = json::array();
  for (const auto& v : report.votes) {
    json vote;
    vote["vote_index"] = v.vote_index;
    vote["partition_seed"] = v.partition.seed;
    vote["fit_calls"] = v.fit_call_count;
    vote["constant_normalization"] = v.constant_normalization;
    json bags = json::array();
    for (std::size_t i = 0; i < v.partition.n(); ++i) {
      const auto& t = v.thresholds[i];
      json bag;
      bag["members"] = v.partition.bags[i];
      bag["predictors"] = v.predictors[i];
      bag["predictions"] = v.predictions[i];
      bag["gmm"] = t.gmm ? gmm_to_json(*t.gmm) : json(nullptr);
      bag["threshold"] = t.threshold;
      bag["fallback"] = t.fallback;
      bag["threshold_clamped"] = t.clamped;
      bags.push_back(std::move(bag));
    }
    vote["bags"] = std::move(bags);
    vote["anomalous_votes"] = v.anomalous_votes;
    std::vector<int> removed(v.removed.begin(), v.removed.end());
    vote["removed"] = removed;
    votes.push_back(std::move(vote));
  }
  j["votes"] = std::move(votes);

  std::vector<std::string> kept, removed;
  for (auto i : report.kept) kept.push_back(report.sample_ids[i]);
  for (auto i : report.removed) removed.push_back(report.sample_ids[i]);
  j["kept"] = kept;
  j["removed"] = removed;
  j["total_fit_calls"] = report.total_fit_calls;
  j["final_train_seed"] = report.final_train_seed;
  j["final_train_size"] = report.kept.size();
  if (report.evaluation) {
    j["evaluation"] = {{"filter_precision", optional_number(report.evaluation->precision)},
                       {"filter_recall", optional_number(report.evaluation->recall)}};
  } else {
    j["evaluation"] = nullptr;
  }
  return j;
}

std::string serialize_report(const FilterReport& report) { return report_to_json(report).dump(2) + "\n"; }

std::vector<bool> replay_filter_decisions(const json& report) {
  if (report.value("format", std::string()) != "baaf-filter-report") {
    throw ValidationError("replay: not a filter report");
  }
  if (report.value("version", 0) != kFilterReportVersion) {
    throw ValidationError("replay: unsupported report version");
  }
  const auto config = config_from_json(report.at("config"));
  const std::size_t samples = report.at("samples").size();
  std::vector<std::vector<bool>> removed_per_vote;
  for (const auto& vote : report.at("votes")) {
    std::vector<bool> removed(samples, false);
    for (const auto& bag : vote.at("bags")) {
      const auto members = bag.at("members").get<std::vector<std::size_t>>();
      const auto predictions = bag.at("predictions").get<std::vector<std::vector<double>>>();
      std::vector<double> pooled;
      for (const auto& p : predictions) pooled.insert(pooled.end(), p.begin(), p.end());
      const double t = bag_threshold(pooled, config.em).threshold;
      for (std::size_t x = 0; x < members.size(); ++x) {
        std::size_t votes = 0;
        for (const auto& p : predictions) votes += p.at(x) > t ? 1 : 0;
        removed.at(members[x]) = majority_anomalous(votes, predictions.size());
      }
    }
    removed_per_vote.push_back(std::move(removed));
  }
  return aggregate_votes(removed_per_vote);
}

}  // namespace baaf
