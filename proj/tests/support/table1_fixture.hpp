#ifndef WDR_TESTS_TABLE1_FIXTURE_HPP
#define WDR_TESTS_TABLE1_FIXTURE_HPP

#include <map>
#include <string>
#include <vector>

#include "test_providers.hpp"
#include "wdr/text.hpp"

namespace wdr::fakes {

// Published movie-review example: an original negative review and its
// two-word adversarial twin, with the logits reported for selected
// ablations. Ablations not listed answer with the sentence's own logits.
struct Table1 {
  TokenizedText original;
  TokenizedText adversarial;
  TableProvider provider{2, {}};

  static std::size_t index_of(const TokenizedText& t, const std::string& word) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.tokens[i] == word) return i;
    }
    throw std::runtime_error("word not in sentence: " + word);
  }
};

inline Table1 make_table1() {
  const std::string orig =
      "This is absolutely the worst trash I have ever seen. It took 15 full minutes before I realized "
      "that what I was seeing was a sick joke!";
  const std::string adv =
      "This is absolutely the tough trash I have ever seen. It took 15 full minutes before I realized "
      "that what I was seeing was a silly joke!";
  const std::map<std::string, std::vector<Real>> orig_rows{
      {"", {3.44, -3.46}},        {"worst", {1.68, -1.75}},    {"sick", {3.34, -3.42}},
      {"absolutely", {3.40, -3.45}}, {"realized", {3.41, -3.47}}};
  const std::map<std::string, std::vector<Real>> adv_rows{
      {"", {-1.85, 2.17}},        {"tough", {2.14, -1.50}},    {"silly", {1.38, -1.37}},
      {"absolutely", {-0.31, 0.48}}, {"realized", {-1.07, 1.36}}};

  std::map<std::string, std::vector<Real>> table;
  auto add = [&](const TokenizedText& t, const std::map<std::string, std::vector<Real>>& rows) {
    table[detokenize(t)] = rows.at("");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto it = rows.find(t.tokens[i]);
      table[detokenize(substitute(t, i, std::string(kUnkToken)))] = it == rows.end() ? rows.at("") : it->second;
    }
  };
  Table1 out;
  out.original = tokenize(orig);
  out.adversarial = tokenize(adv);
  add(out.original, orig_rows);
  add(out.adversarial, adv_rows);
  out.provider = TableProvider(2, std::move(table));
  return out;
}

}  // namespace wdr::fakes

#endif  // WDR_TESTS_TABLE1_FIXTURE_HPP
