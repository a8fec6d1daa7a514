#include "wdr/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace wdr {

namespace {

std::vector<Origin> classify_all(std::span<const Real> probabilities, Real tau) {
  std::vector<Origin> out;
  out.reserve(probabilities.size());
  for (const auto p : probabilities) out.push_back(classify(p, tau));
  return out;
}

std::vector<Real> probabilities_of(const DetectorModel& model, std::span<const LabeledWdr> rows) {
  std::vector<Real> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(model.predict_proba(r.vector));
  return out;
}

}  // namespace

MetricsReport evaluate_detector(const DetectorModel& model, std::span<const LabeledWdr> rows, Real tau) {
  if (!(tau > 0 && tau < 1)) throw InvalidArgument("decision threshold must lie in (0, 1)");
  const auto probs = probabilities_of(model, rows);
  const auto labels = origins(rows);
  return compute_metrics(classify_all(probs, tau), labels, tau);
}

MetricsReport evaluate_detector(const DetectorModel& model, std::span<const LabeledWdr> rows) {
  return evaluate_detector(model, rows, model.threshold);
}

std::vector<MetricsReport> threshold_sweep(std::span<const Real> probabilities, std::span<const Origin> labels,
                                           std::span<const Real> taus) {
  std::vector<MetricsReport> out;
  out.reserve(taus.size());
  for (const auto tau : taus) {
    if (!(tau > 0 && tau < 1)) throw InvalidArgument("decision threshold must lie in (0, 1)");
    out.push_back(compute_metrics(classify_all(probabilities, tau), labels, tau));
  }

  std::vector<std::size_t> by_tau(out.size());
  std::iota(by_tau.begin(), by_tau.end(), std::size_t{0});
  std::stable_sort(by_tau.begin(), by_tau.end(), [&](std::size_t a, std::size_t b) { return taus[a] < taus[b]; });
  for (std::size_t k = 1; k < by_tau.size(); ++k) {
    const auto& lo = out[by_tau[k - 1]];
    const auto& hi = out[by_tau[k]];
    if (hi.counts.tp_adv > lo.counts.tp_adv || hi.counts.tp_orig < lo.counts.tp_orig) {
      throw std::logic_error("threshold sweep lost monotonicity between tau=" + std::to_string(lo.threshold) +
                             " and tau=" + std::to_string(hi.threshold));
    }
  }
  return out;
}

std::vector<MetricsReport> threshold_sweep(const DetectorModel& model, std::span<const LabeledWdr> rows,
                                           std::span<const Real> taus) {
  const auto probs = probabilities_of(model, rows);
  const auto labels = origins(rows);
  return threshold_sweep(probs, labels, taus);
}

nlohmann::ordered_json sweep_to_json(std::span<const MetricsReport> reports) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : reports) rows.push_back(r.to_json());
  j["rows"] = std::move(rows);
  return j;
}

std::string describe(const ConfigSpec& spec) {
  return "(" + spec.model + ", " + spec.dataset + ", " + spec.attack + ")";
}

std::vector<LabeledWdr> load_transfer_set(const TransferTestSpec& spec) {
  if (!std::filesystem::exists(spec.wdr)) {
    throw InvalidArgument("transfer spec " + describe(spec.config) + ": WDR file " + spec.wdr.string() +
                          " does not exist");
  }
  return load_wdr_dataset(spec.wdr);
}

std::vector<std::string> changed_components(const ConfigSpec& train, const ConfigSpec& test) {
  std::vector<std::string> out;
  if (train.model != test.model) out.emplace_back("model");
  if (train.dataset != test.dataset) out.emplace_back("dataset");
  if (train.attack != test.attack) out.emplace_back("attack");
  return out;
}

std::vector<TransferRow> run_transfer_matrix(const DetectorModel& model, const TransferConfig& cfg,
                                             const WdrResolver& resolve) {
  std::vector<TransferRow> rows;
  rows.reserve(cfg.tests.size());
  for (const auto& test : cfg.tests) {
    std::vector<LabeledWdr> data;
    try {
      data = resolve(test);
    } catch (const std::exception& e) {
      throw InvalidArgument("cannot resolve transfer spec " + describe(test.config) + ": " + e.what());
    }
    if (data.empty()) throw InvalidArgument("transfer spec " + describe(test.config) + " resolved to an empty set");
    TransferRow row;
    row.config = test.config;
    row.changed = changed_components(cfg.train, test.config);
    row.metrics = evaluate_detector(model, data);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::ordered_json transfer_to_json(std::span<const TransferRow> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.config.model;
    j["dataset"] = r.config.dataset;
    j["attack"] = r.config.attack;
    j["changed"] = r.changed;
    j["f1"] = r.metrics.macro_f1;
    j["adv_recall"] = r.metrics.adv_recall;
    j["precision"] = r.metrics.precision_adv;
    j["orig_recall"] = r.metrics.orig_recall;
    j["n"] = r.metrics.counts.total();
    arr.push_back(std::move(j));
  }
  return {{"rows", std::move(arr)}};
}

}  // namespace wdr
