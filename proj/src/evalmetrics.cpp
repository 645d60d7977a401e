#include "erckit/evalmetrics.hpp"

#include <json.hpp>

#include <iomanip>
#include <sstream>

namespace erc::evalmetrics {

EvalReport evaluate(const std::vector<int>& preds, const std::vector<int>& golds,
                    const EmotionLabelSet& labels) {
  if (preds.size() != golds.size())
    throw DataError("prediction and gold sequences differ in length");
  if (golds.empty()) throw DataError("nothing to evaluate");
  int k = labels.size();
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] < 0 || preds[i] >= k || golds[i] < 0 || golds[i] >= k)
      throw DataError("class index out of range at position " + std::to_string(i));

  EvalReport r;
  r.scored = long(golds.size());
  r.confusion.assign(size_t(k), std::vector<long>(size_t(k), 0));
  r.per_class.resize(size_t(k));

  long total_tp = 0;
  for (size_t i = 0; i < golds.size(); ++i) {
    ++r.confusion[size_t(golds[i])][size_t(preds[i])];
    PerClass& g = r.per_class[size_t(golds[i])];
    ++g.support;
    if (preds[i] == golds[i]) {
      ++g.tp;
      ++total_tp;
    } else {
      ++g.fn;
      ++r.per_class[size_t(preds[i])].fp;
    }
  }

  double n = double(r.scored);
  for (int c = 0; c < k; ++c) {
    PerClass& pc = r.per_class[size_t(c)];
    pc.label = labels.name(c);
    pc.precision = pc.tp + pc.fp > 0 ? double(pc.tp) / double(pc.tp + pc.fp) : 0.0;
    pc.recall = pc.tp + pc.fn > 0 ? double(pc.tp) / double(pc.tp + pc.fn) : 0.0;
    pc.f1 = pc.precision + pc.recall > 0
                ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                : 0.0;
    r.weighted_precision += double(pc.support) * pc.precision / n;
    r.weighted_f1 += double(pc.support) * pc.f1 / n;
  }
  // support * recall telescopes to the true-positive count, so the weighted
  // recall is written as total_tp / n to make its equality with the accuracy
  // hold exactly in floating point.
  r.accuracy = double(total_tp) / n;
  r.weighted_recall = double(total_tp) / n;
  return r;
}

std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  static const char* metric_headers[] = {"Weighted F1", "Accuracy", "Weighted Precision",
                                         "Weighted Recall"};
  size_t name_w = std::string("Model Name").size();
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());

  std::ostringstream out;
  out << std::left << std::setw(int(name_w)) << "Model Name";
  for (const char* h : metric_headers) out << "  " << h;
  out << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, r] : rows) {
    out << std::left << std::setw(int(name_w)) << name << std::right;
    double vals[] = {r.weighted_f1, r.accuracy, r.weighted_precision, r.weighted_recall};
    for (size_t c = 0; c < 4; ++c)
      out << "  " << std::setw(int(std::string(metric_headers[c]).size())) << vals[c];
    out << "\n";
  }
  return out.str();
}

std::string report_to_json(const EvalReport& r, const EmotionLabelSet& labels) {
  nlohmann::ordered_json j;
  j["scored"] = r.scored;
  j["unscored"] = r.unscored;
  j["accuracy"] = r.accuracy;
  j["weighted_precision"] = r.weighted_precision;
  j["weighted_recall"] = r.weighted_recall;
  j["weighted_f1"] = r.weighted_f1;
  j["labels"] = labels.names();
  j["per_class"] = nlohmann::ordered_json::array();
  for (const PerClass& pc : r.per_class) {
    nlohmann::ordered_json e;
    e["label"] = pc.label;
    e["support"] = pc.support;
    e["tp"] = pc.tp;
    e["fp"] = pc.fp;
    e["fn"] = pc.fn;
    e["precision"] = pc.precision;
    e["recall"] = pc.recall;
    e["f1"] = pc.f1;
    j["per_class"].push_back(e);
  }
  j["confusion"] = r.confusion;
  return j.dump(2) + "\n";
}

}  // namespace erc::evalmetrics
