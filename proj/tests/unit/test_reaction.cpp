#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "table1_fixture.hpp"
#include "test_providers.hpp"
#include "wdr/reaction.hpp"

using namespace wdr;

namespace {

Real round2(Real v) { return std::round(v * 100.0) / 100.0; }

LinearTextClassifier small_model() {
  LinearTextClassifier clf(2, 1u << 12);
  clf.set_word_weight("good", 1, 2.0);
  clf.set_word_weight("great", 1, 1.5);
  clf.set_word_weight("bad", 0, 1.8);
  clf.set_word_weight("dull", 0, 0.9);
  clf.set_word_weight("plot", 0, 0.2);
  return clf;
}

Corpus small_corpus() {
  Corpus c;
  for (const char* s : {"good plot", "bad and dull film", "", "great good bad", "the plot was dull", "ok"}) {
    c.examples.push_back({tokenize(s), 0, Origin::original});
  }
  c.examples[1].origin = Origin::adversarial;
  return c;
}

}  // namespace

TEST(DifferentialReaction, SpecCases) {
  EXPECT_NEAR(differential_reaction(Vec{{2.14, -1.50}}, 1), -3.64, 1e-12);
  EXPECT_NEAR(differential_reaction(Vec{{1.68, -1.75}}, 0), 3.43, 1e-12);
  EXPECT_EQ(differential_reaction(Vec{{0.7, 0.7, 0.7}}, 2), 0.0);
  EXPECT_DOUBLE_EQ(differential_reaction(Vec{{0.5, 2.0, 1.0}}, 0), -1.5);
  EXPECT_THROW(differential_reaction(Vec{{1.0}}, 0), InvalidArgument);
}

TEST(WdrScore, PublishedExampleRows) {
  const auto t = fakes::make_table1();
  auto score = [&](const TokenizedText& text, const char* word) {
    return wdr_score(t.provider, text, fakes::Table1::index_of(text, word)).wdr;
  };
  EXPECT_EQ(round2(score(t.adversarial, "tough")), -3.64);
  EXPECT_EQ(round2(score(t.adversarial, "silly")), -2.75);
  EXPECT_EQ(round2(score(t.original, "worst")), 3.43);
  EXPECT_EQ(round2(score(t.original, "sick")), 6.76);
  EXPECT_NEAR(baseline_reaction(t.provider, t.original), 6.90, 1e-9);
  EXPECT_NEAR(baseline_reaction(t.provider, t.adversarial), 4.02, 1e-9);
  // Rows printed from unrounded logits: 3.40 + 3.45 = 6.85 here, 6.86 in print.
  EXPECT_NEAR(score(t.original, "absolutely"), 6.86, 0.011);
  EXPECT_NEAR(score(t.adversarial, "absolutely"), 0.79, 1e-9);
  EXPECT_NEAR(score(t.adversarial, "realized"), 2.43, 1e-9);
}

TEST(WdrScore, ExplicitReferenceAndRange) {
  const auto t = fakes::make_table1();
  const auto i = fakes::Table1::index_of(t.adversarial, "tough");
  EXPECT_NEAR(wdr_score(t.provider, t.adversarial, i, 0).wdr, 3.64, 1e-9);
  EXPECT_EQ(wdr_score(t.provider, t.adversarial, i).token, "tough");
  EXPECT_THROW(wdr_score(t.provider, t.adversarial, t.adversarial.size()), InvalidArgument);
}

TEST(WdrScore, UnchangedLogitsGiveZeroWhenTied) {
  fakes::TableProvider f(2, {{"a b", {1.0, 1.0}}, {"<unk> b", {1.0, 1.0}}, {"a <unk>", {1.0, 1.0}}});
  EXPECT_EQ(wdr_score(f, tokenize("a b"), 0).wdr, 0.0);
}

TEST(AssembleValues, SortsByMagnitudeAndPads) {
  const std::vector<Real> s{3.43, -3.64, 0.79, 2.43};
  const Vec v = assemble_wdr_values(s, 6);
  const Vec expected{{-3.64, 3.43, 2.43, 0.79, 0.0, 0.0}};
  EXPECT_EQ(v, expected);

  const std::vector<Real> tie{5.0, -5.0};
  EXPECT_EQ(assemble_wdr_values(tie, 2), (Vec{{5.0, -5.0}}));
  const std::vector<Real> tie_rev{-5.0, 5.0};
  EXPECT_EQ(assemble_wdr_values(tie_rev, 2), (Vec{{-5.0, 5.0}}));
  EXPECT_THROW(assemble_wdr_values(s, 0), InvalidArgument);
}

TEST(AssembleValues, LongSentenceKeepsLargestMagnitudes) {
  std::mt19937_64 rng(3);
  std::normal_distribution<Real> normal(0.0, 2.0);
  std::vector<Real> s(100);
  for (auto& x : s) x = normal(rng);
  const Vec v = assemble_wdr_values(s, 64);

  // Oracle: the 64th largest magnitude bounds everything kept.
  std::vector<Real> mags(s.size());
  std::transform(s.begin(), s.end(), mags.begin(), [](Real x) { return std::abs(x); });
  std::sort(mags.begin(), mags.end(), std::greater<>());
  ASSERT_EQ(v.size(), 64);
  for (Eigen::Index k = 0; k < 64; ++k) EXPECT_EQ(std::abs(v(k)), mags[static_cast<std::size_t>(k)]);
  for (const auto x : s) {
    const bool kept = std::find(v.data(), v.data() + v.size(), x) != v.data() + v.size();
    EXPECT_EQ(kept, std::abs(x) >= mags[63]);
  }
}

TEST(WdrVector, PublishedExampleVector) {
  const auto t = fakes::make_table1();
  const auto v = wdr_vector(t.provider, t.adversarial, 64);
  EXPECT_EQ(v.true_length, t.adversarial.size());
  EXPECT_NEAR(v.baseline, 4.02, 1e-9);
  // Unlisted ablations answer with the sentence logits, so their reaction is the baseline.
  EXPECT_NEAR(v.values(0), 4.02, 1e-9);
  const Vec last = v.values.tail(64 - static_cast<Eigen::Index>(v.true_length));
  EXPECT_TRUE(last.isZero(0.0));
  const auto neg = std::count_if(v.values.data(), v.values.data() + v.values.size(), [](Real x) { return x < 0; });
  EXPECT_EQ(neg, 2);
}

TEST(WdrVector, FeaturesAppendBaselineOnRequest) {
  WdrVector v;
  v.values = Vec{{1.0, -2.0}};
  v.baseline = 7.0;
  EXPECT_EQ(v.features(), v.values);
  EXPECT_EQ(v.features(true), (Vec{{1.0, -2.0, 7.0}}));
}

TEST(BatchWdr, IssuesOneQueryPerAblationPlusBaseline) {
  const auto clf = small_model();
  fakes::CountingProvider f(clf);
  const auto corpus = small_corpus();
  const auto rows = batch_wdr(f, corpus, {.length = 8});
  std::size_t expected = 0;
  for (const auto& ex : corpus.examples) expected += ex.text.size() + 1;
  EXPECT_EQ(f.texts(), expected);
  EXPECT_EQ(f.calls(), corpus.size());
  ASSERT_EQ(rows.size(), corpus.size());
  EXPECT_EQ(rows[1].origin, Origin::adversarial);
  EXPECT_EQ(rows[2].vector.true_length, 0u);
  EXPECT_TRUE(rows[2].vector.values.isZero(0.0));
}

TEST(BatchWdr, EmptyCorpus) {
  const auto clf = small_model();
  EXPECT_TRUE(batch_wdr(clf, Corpus{}).empty());
}

TEST(BatchWdr, BatchingAndThreadsDoNotChangeOutput) {
  const auto clf = small_model();
  const auto corpus = small_corpus();
  std::vector<WdrVector> single;
  for (const auto& ex : corpus.examples) single.push_back(wdr_vector(clf, ex.text, 8));
  for (const auto [per_call, threads] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 1}, {2, 3}, {10, 4}}) {
    const auto rows = batch_wdr(clf, corpus, {.length = 8, .sentences_per_call = per_call, .threads = threads});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(rows[i].vector.values, single[i].values);
      EXPECT_EQ(rows[i].vector.baseline, single[i].baseline);
    }
  }
}

TEST(BatchWdr, ProviderFailureNamesExample) {
  fakes::FailingProvider f;
  try {
    batch_wdr(f, small_corpus());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("example 0"), std::string::npos) << e.what();
  }
}

TEST(SignLaw, PositiveReactionIffReferenceStillWins) {
  const auto clf = small_model();
  std::mt19937_64 rng(8);
  const std::vector<std::string> words{"good", "great", "bad", "dull", "plot", "film", "the"};
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const auto n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) s += words[rng() % words.size()] + " ";
    const auto text = tokenize(s);
    const ClassIndex ref = predicted_class(predict_logits(clf, text));
    for (std::size_t i = 0; i < text.size(); ++i) {
      const Vec z = predict_logits(clf, substitute(text, i, std::string(kUnkToken)));
      if (z(0) == z(1)) continue;
      EXPECT_EQ(wdr_score(clf, text, i).wdr > 0, predicted_class(z) == ref);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(WdrDataset, RoundTripsExactly) {
  const auto clf = small_model();
  const auto rows = batch_wdr(clf, small_corpus(), {.length = 5});
  const auto back = parse_wdr_dataset(serialize_wdr_dataset(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].vector.values, rows[i].vector.values);
    EXPECT_EQ(back[i].vector.baseline, rows[i].vector.baseline);
    EXPECT_EQ(back[i].vector.true_length, rows[i].vector.true_length);
    EXPECT_EQ(back[i].origin, rows[i].origin);
  }
  EXPECT_EQ(serialize_wdr_dataset(back), serialize_wdr_dataset(rows));
}

TEST(WdrDataset, RejectsInconsistentLengths) {
  const std::string doc =
      "{\"values\":[1,2],\"true_length\":2,\"baseline\":1,\"origin\":\"original\"}\n"
      "{\"values\":[1,2,3],\"true_length\":3,\"baseline\":1,\"origin\":\"original\"}\n";
  try {
    parse_wdr_dataset(doc);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_wdr_dataset("{\"values\":[1],\"true_length\":1,\"baseline\":1}\n"), FormatError);
}
