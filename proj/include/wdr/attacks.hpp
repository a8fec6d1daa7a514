#ifndef WDR_ATTACKS_HPP
#define WDR_ATTACKS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "wdr/classifier.hpp"
#include "wdr/text.hpp"

namespace wdr {

/// Word -> candidate replacements. Keys are stored lowercased; lookups are
/// case-insensitive; a word never lists itself.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  void add(std::string_view word, std::span<const std::string> synonyms);
  /// Candidates for `word` in file order, lowercased. Empty if none.
  const std::vector<std::string>& candidates(std::string_view word) const;
  bool contains(std::string_view word) const { return !candidates(word).empty(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// "word\tsyn1,syn2,..." per line; blank lines and lines starting with
  /// '#' are ignored.
  static SynonymLexicon parse(std::string_view content);
  static SynonymLexicon load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

/// Copies the capitalization pattern of `like` onto `word`:
/// ALL CAPS, Capitalized, or lowercase.
std::string match_case(std::string_view word, std::string_view like);

/// Common English function words never chosen as substitution targets.
bool is_stop_word(std::string_view word);

enum class AttackKind { pwws, importance, genetic };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view s);

struct AttackConfig {
  /// Upper bound on substituted words as a fraction of the word count,
  /// rounded up (a one-word sentence may change its word).
  Real max_substitution_fraction = 0.25;
  /// Provider texts one attack may query; 0 means the attack stops before
  /// its first query.
  std::size_t query_budget = 5000;
  std::size_t population_size = 20;
  std::size_t generations = 20;
  Real mutation_rate = 0.3;
  std::uint64_t seed = 13;

  void validate() const;
  std::size_t max_substitutions(std::size_t word_count) const;
};

struct Substitution {
  std::size_t index = 0;
  std::string old_word;
  std::string new_word;

  friend bool operator==(const Substitution&, const Substitution&) = default;
};

struct AttackResult {
  LabeledExample original;
  TokenizedText adversarial;
  std::vector<Substitution> substitutions;  // sorted by index
  bool success = false;
  /// Input was already misclassified; nothing was attempted.
  bool skipped = false;
  std::size_t queries_used = 0;

  friend bool operator==(const AttackResult&, const AttackResult&) = default;
};

/// Reverts the listed substitutions; equals result.original.text for any
/// well-formed result.
TokenizedText revert_substitutions(const AttackResult& result);

/// p(y*|x) - p(y*|x with word i set to "<unk>") for every word, where y* is
/// the class predicted on x.
std::vector<Real> word_saliency(const LogitsProvider& f, const TokenizedText& text);

/// Greedy probability-weighted word saliency search. Words are visited in
/// descending order of dp*_i * softmax(saliency)_i, where dp*_i is the
/// largest drop in p(y*) any synonym of word i achieves; each visited word
/// gets its best synonym until the prediction flips or the substitution
/// budget runs out.
AttackResult pwws_attack(const LogitsProvider& f, const LabeledExample& example, const SynonymLexicon& lexicon,
                         const AttackConfig& cfg);

/// Importance-ranked greedy search: words ordered by saliency alone; each
/// takes the first synonym that lowers the current y* margin.
AttackResult importance_greedy_attack(const LogitsProvider& f, const LabeledExample& example,
                                      const SynonymLexicon& lexicon, const AttackConfig& cfg);

/// Population search: elite kept each generation, the rest bred by
/// per-position crossover of fitness-sampled parents plus random lexicon
/// mutation. Fitness is the negative y* margin. Deterministic given cfg.seed.
AttackResult genetic_attack(const LogitsProvider& f, const LabeledExample& example, const SynonymLexicon& lexicon,
                            const AttackConfig& cfg);

AttackResult run_attack(AttackKind kind, const LogitsProvider& f, const LabeledExample& example,
                        const SynonymLexicon& lexicon, const AttackConfig& cfg);

struct AttackReport {
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
  std::size_t skipped = 0;
  std::size_t unverified = 0;  // claimed flips that did not reproduce on re-query
  Real mean_queries = 0;
  Real mean_substitution_rate = 0;  // over successful attacks
  std::vector<std::size_t> queries_per_sample;

  Real success_rate() const {
    return attempted == 0 ? 0.0 : static_cast<Real>(succeeded) / static_cast<Real>(attempted);
  }
  std::string to_json() const;
};

struct AttackDataset {
  Corpus corpus;  // original/adversarial pairs, interleaved
  AttackReport report;
  std::vector<AttackResult> results;  // one per input example
};

/// Attacks every example of `corpus`; for each success emits the original
/// (origin=original) followed by its adversarial twin (origin=adversarial),
/// both carrying the original label. Each sample's attack uses a seed
/// derived from cfg.seed and the sample index, so `threads` does not change
/// the output.
AttackDataset generate_attack_dataset(const LogitsProvider& f, const Corpus& corpus, AttackKind kind,
                                      const SynonymLexicon& lexicon, const AttackConfig& cfg,
                                      std::size_t threads = 1);

}  // namespace wdr

#endif  // WDR_ATTACKS_HPP
