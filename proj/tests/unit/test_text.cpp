#include <gtest/gtest.h>

#include <random>

#include "wdr/text.hpp"

using namespace wdr;

TEST(Tokenize, SplitsWordsAndKeepsSeparators) {
  const auto t = tokenize("a sick joke!");
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"a", "sick", "joke"}));
  EXPECT_EQ(t.separators, (std::vector<std::string>{"", " ", " ", "!"}));
  EXPECT_EQ(t.separators.back(), "!");
}

TEST(Tokenize, EmptyAndPunctuationOnly) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("").separators, std::vector<std::string>{""});
  const auto t = tokenize(" ... !");
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(detokenize(t), " ... !");
}

TEST(Tokenize, JoinersStayInsideWords) {
  const auto t = tokenize("don't stop, well-made 'quotes' -dash");
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"don't", "stop", "well-made", "quotes", "dash"}));
}

TEST(Tokenize, UnkPlaceholderIsNeverAToken) {
  const auto t = tokenize("<unk>");
  EXPECT_EQ(t.tokens, std::vector<std::string>{"unk"});
}

TEST(Tokenize, Utf8LettersStayWhole) {
  const auto t = tokenize("caf\xc3\xa9 na\xc3\xafve");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.tokens[0], "caf\xc3\xa9");
}

TEST(Tokenize, RoundTripsRandomAsciiStrings) {
  std::mt19937_64 rng(42);
  const std::string alphabet =
      "abcXYZ019 \t\n\r.,;:!?'\"-_()<>[]{}/\\@#$%^&*+=~`|";
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const auto len = rng() % 40;
    for (std::size_t i = 0; i < len; ++i) {
      // Mix the structured alphabet with arbitrary 7-bit bytes, control chars included.
      s += (rng() % 4 == 0) ? static_cast<char>(rng() % 128) : alphabet[rng() % alphabet.size()];
    }
    const auto t = tokenize(s);
    ASSERT_EQ(t.separators.size(), t.tokens.size() + 1);
    ASSERT_EQ(detokenize(t), s) << "trial " << trial;
    for (const auto& tok : t.tokens) ASSERT_FALSE(tok.empty());
  }
}

TEST(Substitute, ReplacesOneTokenOnly) {
  const auto t = tokenize("a sick joke!");
  EXPECT_EQ(detokenize(substitute(t, 1, "silly")), "a silly joke!");
  EXPECT_EQ(detokenize(t), "a sick joke!");
  EXPECT_THROW(substitute(t, 3, "x"), InvalidArgument);
}

TEST(Origin, RoundTripsNames) {
  EXPECT_EQ(parse_origin(to_string(Origin::adversarial)), Origin::adversarial);
  EXPECT_EQ(parse_origin("original"), Origin::original);
  EXPECT_THROW(parse_origin("clean"), FormatError);
}

TEST(Corpus, ParsesRecordsWithOptionalOrigin) {
  const auto c = parse_corpus(
      "{\"text\": \"good film\", \"label\": 1}\n\n{\"text\": \"bad\", \"label\": 0, \"origin\": \"adversarial\"}\n", 2);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.examples[0].label, 1);
  EXPECT_EQ(c.examples[0].origin, Origin::original);
  EXPECT_EQ(c.examples[1].origin, Origin::adversarial);
}

TEST(Corpus, MissingLabelNamesTheLine) {
  try {
    parse_corpus("{\"text\": \"no label here\"}\n", 2);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
}

TEST(Corpus, RejectsBadJsonAndOutOfRangeLabels) {
  EXPECT_THROW(parse_corpus("{\"text\": \"a\", \"label\": 0}\nnot json\n", 2), FormatError);
  try {
    parse_corpus("{\"text\": \"a\", \"label\": 0}\n{\"text\": \"b\", \"label\": 5}\n", 2);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Corpus, SerializeRoundTrips) {
  Corpus c;
  c.examples.push_back({tokenize("It's \"quoted\", ok?"), 1, Origin::original});
  c.examples.push_back({tokenize("tabs\tand\nnewlines"), 0, Origin::adversarial});
  const auto back = parse_corpus(serialize_corpus(c), 2);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.examples[0], c.examples[0]);
  EXPECT_EQ(back.examples[1], c.examples[1]);
}

TEST(Vocabulary, ReservesUnkAtZero) {
  Vocabulary v;
  EXPECT_EQ(v.word_at(0), "<unk>");
  EXPECT_EQ(v.add("film"), 1u);
  EXPECT_EQ(v.add("film"), 1u);
  EXPECT_EQ(v.index_of("missing"), Vocabulary::kUnkIndex);

  Corpus c;
  c.examples.push_back({tokenize("Good good film"), 1, Origin::original});
  const auto built = Vocabulary::build(c);
  EXPECT_EQ(built.size(), 3u);
  EXPECT_TRUE(built.contains("good"));
}
