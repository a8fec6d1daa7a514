#ifndef WDR_EVAL_HPP
#define WDR_EVAL_HPP

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wdr/detector.hpp"
#include "wdr/metrics.hpp"
#include "wdr/reaction.hpp"

namespace wdr {

/// Decision thresholds in the row order of the published sweep table.
inline const std::vector<Real> kDefaultThresholdGrid{0.5, 0.4, 0.3, 0.15};

MetricsReport evaluate_detector(const DetectorModel& model, std::span<const LabeledWdr> rows, Real tau);
MetricsReport evaluate_detector(const DetectorModel& model, std::span<const LabeledWdr> rows);

/// One report per tau, in the given order, from one pass of cached
/// probabilities. Checks that adversarial recall never rises and original
/// recall never falls as tau increases; a violation throws std::logic_error.
std::vector<MetricsReport> threshold_sweep(std::span<const Real> probabilities, std::span<const Origin> labels,
                                           std::span<const Real> taus);
std::vector<MetricsReport> threshold_sweep(const DetectorModel& model, std::span<const LabeledWdr> rows,
                                           std::span<const Real> taus = kDefaultThresholdGrid);

nlohmann::ordered_json sweep_to_json(std::span<const MetricsReport> reports);

/// (target model, dataset, attack) identifying how a WDR set was produced.
struct ConfigSpec {
  std::string model;
  std::string dataset;
  std::string attack;

  friend bool operator==(const ConfigSpec&, const ConfigSpec&) = default;
};

struct TransferTestSpec {
  ConfigSpec config;
  std::filesystem::path wdr;  // labeled WDR dataset for this configuration
};

struct TransferConfig {
  ConfigSpec train;
  std::vector<TransferTestSpec> tests;
};

struct TransferRow {
  ConfigSpec config;
  std::vector<std::string> changed;  // subset of {"model", "dataset", "attack"}
  MetricsReport metrics;
};

using WdrResolver = std::function<std::vector<LabeledWdr>(const TransferTestSpec&)>;

/// Reads spec.wdr from disk; throws InvalidArgument naming the spec when
/// the file is missing.
std::vector<LabeledWdr> load_transfer_set(const TransferTestSpec& spec);

std::vector<std::string> changed_components(const ConfigSpec& train, const ConfigSpec& test);

/// Evaluates the frozen detector on every test configuration, in order.
std::vector<TransferRow> run_transfer_matrix(const DetectorModel& model, const TransferConfig& cfg,
                                             const WdrResolver& resolve = load_transfer_set);

/// {"rows": [{"model", "dataset", "attack", "changed", "f1", "adv_recall",
/// "precision", "orig_recall", "n"}, ...]}
nlohmann::ordered_json transfer_to_json(std::span<const TransferRow> rows);

std::string describe(const ConfigSpec& spec);

}  // namespace wdr

#endif  // WDR_EVAL_HPP
