#include "wdr/metrics.hpp"

#include <cmath>

namespace wdr {

namespace {

Real ratio(std::size_t num, std::size_t den, const char* name, std::vector<std::string>& flags) {
  if (den == 0) {
    flags.emplace_back(name);
    return 0.0;
  }
  return static_cast<Real>(num) / static_cast<Real>(den);
}

Real f1(Real p, Real r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["threshold"] = threshold;
  j["f1"] = macro_f1;
  j["adv_recall"] = adv_recall;
  j["orig_recall"] = orig_recall;
  j["precision"] = precision_adv;
  j["precision_orig"] = precision_orig;
  j["f1_adv"] = f1_adv;
  j["f1_orig"] = f1_orig;
  j["counts"] = {{"tp_adv", counts.tp_adv}, {"fn_adv", counts.fn_adv}, {"tp_orig", counts.tp_orig},
                 {"fp_adv", counts.fp_adv}};
  j["n"] = counts.total();
  j["zero_division"] = zero_division;
  j["unbalanced"] = unbalanced;
  return j;
}

ConfusionCounts confusion(std::span<const Origin> predictions, std::span<const Origin> labels) {
  if (predictions.size() != labels.size()) {
    throw InvalidArgument("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool adv_pred = predictions[i] == Origin::adversarial;
    if (labels[i] == Origin::adversarial) {
      ++(adv_pred ? c.tp_adv : c.fn_adv);
    } else {
      ++(adv_pred ? c.fp_adv : c.tp_orig);
    }
  }
  return c;
}

bool is_unbalanced(const ConfusionCounts& counts) {
  if (counts.total() == 0) return false;
  const Real share = static_cast<Real>(counts.adversarial()) / static_cast<Real>(counts.total());
  return std::abs(share - 0.5) > 0.05;
}

MetricsReport metrics_from_counts(const ConfusionCounts& c, Real threshold) {
  MetricsReport m;
  m.counts = c;
  m.threshold = threshold;
  m.adv_recall = ratio(c.tp_adv, c.tp_adv + c.fn_adv, "adv_recall", m.zero_division);
  m.orig_recall = ratio(c.tp_orig, c.tp_orig + c.fp_adv, "orig_recall", m.zero_division);
  m.precision_adv = ratio(c.tp_adv, c.tp_adv + c.fp_adv, "precision_adv", m.zero_division);
  m.precision_orig = ratio(c.tp_orig, c.tp_orig + c.fn_adv, "precision_orig", m.zero_division);
  m.f1_adv = f1(m.precision_adv, m.adv_recall);
  m.f1_orig = f1(m.precision_orig, m.orig_recall);
  m.macro_f1 = 0.5 * (m.f1_adv + m.f1_orig);
  m.unbalanced = is_unbalanced(c);
  return m;
}

MetricsReport compute_metrics(std::span<const Origin> predictions, std::span<const Origin> labels, Real threshold) {
  return metrics_from_counts(confusion(predictions, labels), threshold);
}

}  // namespace wdr
