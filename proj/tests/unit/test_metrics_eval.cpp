#include <gtest/gtest.h>

#include <random>

#include "wdr/eval.hpp"

using namespace wdr;

namespace {

std::vector<Origin> repeat(Origin o, std::size_t n) { return std::vector<Origin>(n, o); }

std::vector<Origin> concat(std::initializer_list<std::vector<Origin>> parts) {
  std::vector<Origin> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Rows whose single feature is the detector margin's sign driver; a stump splits at 0.
std::vector<LabeledWdr> rows_from(std::initializer_list<std::pair<Real, Origin>> items) {
  std::vector<LabeledWdr> out;
  for (const auto& [v, o] : items) {
    LabeledWdr r;
    r.vector.values = Vec{{v}};
    r.vector.true_length = 1;
    r.origin = o;
    out.push_back(r);
  }
  return out;
}

DetectorModel stump() {
  DetectorModel m;
  m.feature_length = 1;
  Tree t;
  t.nodes.resize(3);
  t.nodes[0] = {0, 0.0, 1, 2, true, 0, 1.0};
  t.nodes[1].weight = 2.0;   // negative reactions look adversarial
  t.nodes[2].weight = -2.0;
  m.trees.push_back(t);
  return m;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  const auto labels = concat({repeat(Origin::adversarial, 100), repeat(Origin::original, 100)});
  const auto preds = concat({repeat(Origin::adversarial, 95), repeat(Origin::original, 5),
                             repeat(Origin::original, 90), repeat(Origin::adversarial, 10)});
  const auto m = compute_metrics(preds, labels);
  EXPECT_DOUBLE_EQ(m.adv_recall, 0.95);
  EXPECT_DOUBLE_EQ(m.orig_recall, 0.90);
  EXPECT_DOUBLE_EQ(m.precision_adv, 95.0 / 105.0);
  EXPECT_NEAR(m.precision_adv, 0.9048, 5e-5);
  EXPECT_NEAR(m.macro_f1, 493.0 / 533.0, 1e-12);
  EXPECT_FALSE(m.unbalanced);
  EXPECT_TRUE(m.zero_division.empty());
}

TEST(Metrics, MatchesBruteForceCounting) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng() % 40;
    std::vector<Origin> p, y;
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(rng() % 2 ? Origin::adversarial : Origin::original);
      y.push_back(rng() % 2 ? Origin::adversarial : Origin::original);
    }
    const auto m = compute_metrics(p, y);
    auto per_class = [&](Origin c) {
      Real tp = 0, pred = 0, actual = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += p[i] == c && y[i] == c;
        pred += p[i] == c;
        actual += y[i] == c;
      }
      const Real prec = pred == 0 ? 0 : tp / pred;
      const Real rec = actual == 0 ? 0 : tp / actual;
      return std::array<Real, 3>{prec, rec, prec + rec == 0 ? 0 : 2 * prec * rec / (prec + rec)};
    };
    const auto a = per_class(Origin::adversarial);
    const auto o = per_class(Origin::original);
    EXPECT_NEAR(m.precision_adv, a[0], 1e-12);
    EXPECT_NEAR(m.adv_recall, a[1], 1e-12);
    EXPECT_NEAR(m.orig_recall, o[1], 1e-12);
    EXPECT_NEAR(m.macro_f1, (a[2] + o[2]) / 2, 1e-12);
    EXPECT_EQ(m.counts.total(), n);
  }
}

TEST(Metrics, ZeroDivisionAndImbalanceAreFlagged) {
  const auto labels = repeat(Origin::original, 10);
  const auto m = compute_metrics(labels, labels);
  EXPECT_EQ(m.adv_recall, 0.0);
  EXPECT_NE(std::find(m.zero_division.begin(), m.zero_division.end(), "adv_recall"), m.zero_division.end());
  EXPECT_TRUE(m.unbalanced);
  EXPECT_THROW(compute_metrics(labels, repeat(Origin::original, 3)), InvalidArgument);
  const auto j = m.to_json();
  EXPECT_EQ(j["n"], 10);
  EXPECT_EQ(j["unbalanced"], true);
}

TEST(Sweep, SingleSampleFlipsAtItsProbability) {
  const std::vector<Real> probs{0.45};
  const std::vector<Origin> labels{Origin::adversarial};
  const std::vector<Real> taus{0.4, 0.5};
  const auto rows = threshold_sweep(probs, labels, taus);
  EXPECT_EQ(rows[0].counts.tp_adv, 1u);
  EXPECT_EQ(rows[1].counts.tp_adv, 0u);
  EXPECT_EQ(rows[0].threshold, 0.4);
}

TEST(Sweep, RecallsMoveMonotonically) {
  std::mt19937_64 rng(23);
  std::vector<Real> probs;
  std::vector<Origin> labels;
  for (int i = 0; i < 500; ++i) {
    const bool adv = rng() % 2;
    probs.push_back(std::clamp(uniform_unit(rng) * 0.6 + (adv ? 0.35 : 0.05), 0.0, 1.0));
    labels.push_back(adv ? Origin::adversarial : Origin::original);
  }
  const auto rows = threshold_sweep(probs, labels, kDefaultThresholdGrid);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 1; k < rows.size(); ++k) {  // grid runs 0.5 down to 0.15
    EXPECT_GE(rows[k].adv_recall, rows[k - 1].adv_recall);
    EXPECT_LE(rows[k].orig_recall, rows[k - 1].orig_recall);
  }
  const auto j = sweep_to_json(rows);
  EXPECT_EQ(j["rows"].size(), 4u);
  EXPECT_EQ(j["rows"][3]["threshold"], 0.15);
  const std::vector<Real> bad{0.0};
  EXPECT_THROW(threshold_sweep(probs, labels, bad), InvalidArgument);
}

TEST(Evaluate, UsesModelThresholdByDefault) {
  auto m = stump();
  const auto rows = rows_from({{-1.0, Origin::adversarial}, {1.0, Origin::original}, {-0.5, Origin::original}});
  const auto r = evaluate_detector(m, rows);
  EXPECT_EQ(r.counts.tp_adv, 1u);
  EXPECT_EQ(r.counts.fp_adv, 1u);
  m.threshold = 0.99;
  EXPECT_EQ(evaluate_detector(m, rows).counts.tp_adv, 0u);
  EXPECT_THROW(evaluate_detector(m, rows, 1.0), InvalidArgument);
}

TEST(Transfer, SelfTransferEqualsPlainEvaluation) {
  const auto m = stump();
  const auto rows = rows_from({{-1.0, Origin::adversarial}, {1.0, Origin::original}, {-0.5, Origin::original},
                               {0.5, Origin::adversarial}});
  TransferConfig cfg;
  cfg.train = {"builtin", "toy", "pwws"};
  cfg.tests.push_back({cfg.train, "unused"});
  const auto out = run_transfer_matrix(m, cfg, [&](const TransferTestSpec&) { return rows; });
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].changed.empty());
  const auto plain = evaluate_detector(m, rows);
  EXPECT_EQ(out[0].metrics.macro_f1, plain.macro_f1);
  EXPECT_EQ(out[0].metrics.counts.tp_adv, plain.counts.tp_adv);
}

TEST(Transfer, FlagsChangedComponents) {
  const auto m = stump();
  const auto rows = rows_from({{-1.0, Origin::adversarial}, {1.0, Origin::original}});
  TransferConfig cfg;
  cfg.train = {"builtin", "toy", "pwws"};
  cfg.tests.push_back({{"remote", "toy", "pwws"}, "a"});
  cfg.tests.push_back({{"builtin", "imdb", "pwws"}, "b"});
  cfg.tests.push_back({{"builtin", "toy", "genetic"}, "c"});
  const auto out = run_transfer_matrix(m, cfg, [&](const TransferTestSpec&) { return rows; });
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].changed, std::vector<std::string>{"model"});
  EXPECT_EQ(out[1].changed, std::vector<std::string>{"dataset"});
  EXPECT_EQ(out[2].changed, std::vector<std::string>{"attack"});
  const auto j = transfer_to_json(out);
  EXPECT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["rows"][2]["attack"], "genetic");
  EXPECT_EQ(j["rows"][0]["n"], 2);
}

TEST(Transfer, UnresolvableSpecIsNamed) {
  const auto m = stump();
  TransferConfig cfg;
  cfg.train = {"builtin", "toy", "pwws"};
  cfg.tests.push_back({{"builtin", "toy", "genetic"}, "/nonexistent/wdr.jsonl"});
  try {
    run_transfer_matrix(m, cfg);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("(builtin, toy, genetic)"), std::string::npos) << e.what();
  }
  cfg.tests[0].wdr = "x";
  EXPECT_THROW(run_transfer_matrix(m, cfg, [](const TransferTestSpec&) { return std::vector<LabeledWdr>{}; }),
               InvalidArgument);
}
