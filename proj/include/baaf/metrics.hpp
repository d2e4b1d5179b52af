#pragma once

#include <span>
#include <string>
#include <vector>

#include "baaf/dataset.hpp"
#include "baaf/engine.hpp"

namespace baaf {

/// Sample-level ROC AUC: P(random anomaly outscores random nominal), ties
/// count one half. Throws ParameterError unless both classes are present.
double auroc(std::span<const double> scores, const std::vector<bool>& anomalous);

/// Filter precision/recall against the hidden labels of the corrupted train
/// set. Precision is null when nothing was removed; both are null when the
/// set holds no anomalies. Unknown ids throw ParameterError.
FilterEvaluation filter_precision_recall(const std::vector<std::string>& removed_ids,
                                         const LabeledDataset& corrupted_train);

}  // namespace baaf
