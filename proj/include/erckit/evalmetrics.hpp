#pragma once

#include <string>
#include <vector>

#include "erckit/corpus.hpp"

namespace erc::evalmetrics {

using corpus::EmotionLabelSet;

struct PerClass {
  std::string label;
  long support = 0;
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalReport {
  long scored = 0;
  long unscored = 0;
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;  // equals accuracy when every gold is in the label set
  double weighted_f1 = 0.0;
  std::vector<PerClass> per_class;          // label-set order
  std::vector<std::vector<long>> confusion;  // [gold][pred]
};

// Class-index sequences of equal nonzero length; indices must lie in
// [0, labels.size()). Zero-denominator precision/recall/F1 are 0 by
// convention.
EvalReport evaluate(const std::vector<int>& preds, const std::vector<int>& golds,
                    const EmotionLabelSet& labels);

// Fixed-width table, four decimals, one row per named report:
// Model Name | Weighted F1 | Accuracy | Weighted Precision | Weighted Recall.
std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

std::string report_to_json(const EvalReport& r, const EmotionLabelSet& labels);

}  // namespace erc::evalmetrics
