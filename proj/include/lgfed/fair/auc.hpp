#pragma once

#include <span>

namespace lgfed::fair {

/// Mann-Whitney: (concordant pairs + 0.5 * tied pairs) / (positives * negatives).
/// Throws UndefinedMetricError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace lgfed::fair
