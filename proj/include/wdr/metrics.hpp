#ifndef WDR_METRICS_HPP
#define WDR_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdr/text.hpp"
#include "wdr/types.hpp"

namespace wdr {

/// Adversarial is the positive class.
struct ConfusionCounts {
  std::size_t tp_adv = 0;   // adversarial flagged adversarial
  std::size_t fn_adv = 0;   // adversarial passed as original
  std::size_t tp_orig = 0;  // original passed as original
  std::size_t fp_adv = 0;   // original flagged adversarial

  std::size_t total() const { return tp_adv + fn_adv + tp_orig + fp_adv; }
  std::size_t adversarial() const { return tp_adv + fn_adv; }
  std::size_t original() const { return tp_orig + fp_adv; }
};

struct MetricsReport {
  Real macro_f1 = 0;
  Real adv_recall = 0;
  Real orig_recall = 0;
  Real precision_adv = 0;
  Real precision_orig = 0;
  Real f1_adv = 0;
  Real f1_orig = 0;
  ConfusionCounts counts;
  Real threshold = 0.5;
  /// Names of rates whose denominator was zero; those rates are reported as 0.
  std::vector<std::string> zero_division;
  /// Set when the class balance deviates from 50/50 by more than 5 points.
  bool unbalanced = false;

  nlohmann::ordered_json to_json() const;
};

ConfusionCounts confusion(std::span<const Origin> predictions, std::span<const Origin> labels);

/// Precision, recall and F1 for both classes and their unweighted mean.
/// Throws InvalidArgument on length mismatch.
MetricsReport compute_metrics(std::span<const Origin> predictions, std::span<const Origin> labels, Real threshold = 0.5);
MetricsReport metrics_from_counts(const ConfusionCounts& counts, Real threshold = 0.5);

/// True when |adversarial share - 0.5| > 0.05.
bool is_unbalanced(const ConfusionCounts& counts);

}  // namespace wdr

#endif  // WDR_METRICS_HPP
