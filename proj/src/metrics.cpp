#include "baaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "baaf/errors.hpp"

namespace baaf {

double auroc(std::span<const double> scores, const std::vector<bool>& anomalous) {
  if (scores.size() != anomalous.size()) throw ParameterError("auroc: size mismatch");
  std::size_t positives = 0;
  for (bool a : anomalous) positives += a ? 1 : 0;
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ParameterError("auroc: both nominal and anomalous samples are required");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("auroc: NaN score");
  }

  // Mann-Whitney U with midranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (anomalous[order[k]]) positive_rank_sum += midrank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

FilterEvaluation filter_precision_recall(const std::vector<std::string>& removed_ids,
                                         const LabeledDataset& corrupted_train) {
  if (!corrupted_train.labels) throw ParameterError("filter metrics: corrupted train has no labels");
  const auto& labels = *corrupted_train.labels;
  std::size_t true_anomalies = 0;
  for (const auto& id : corrupted_train.data.ids()) true_anomalies += labels.is_anomalous(id) ? 1 : 0;

  std::unordered_set<std::string> seen;
  std::size_t hits = 0;
  for (const auto& id : removed_ids) {
    if (!corrupted_train.data.index_of(id)) {
      throw ParameterError("filter metrics: unknown sample id '" + id + "'");
    }
    if (!seen.insert(id).second) continue;
    hits += labels.is_anomalous(id) ? 1 : 0;
  }
  FilterEvaluation out;
  // With no anomalies in the set there is nothing to find: both undefined.
  if (!seen.empty() && true_anomalies > 0) out.precision = static_cast<double>(hits) / static_cast<double>(seen.size());
  if (true_anomalies > 0) out.recall = static_cast<double>(hits) / static_cast<double>(true_anomalies);
  return out;
}

}  // namespace baaf
