#ifndef WDR_TEXT_HPP
#define WDR_TEXT_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wdr/types.hpp"

namespace wdr {

/// Placeholder inserted when a word is ablated. Tokenization never yields
/// it because '<' and '>' are separator characters.
inline constexpr std::string_view kUnkToken = "<unk>";

/// A sentence split into words plus the glue between them.
///
/// separators.size() == tokens.size() + 1: separators[0] precedes the first
/// token, separators[i + 1] follows tokens[i]. Concatenating them in order
/// reproduces the source string byte for byte.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<std::string> separators{std::string{}};

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  friend bool operator==(const TokenizedText&, const TokenizedText&) = default;
};

/// Splits on whitespace and punctuation. Word characters are ASCII
/// alphanumerics and every non-ASCII byte (so UTF-8 letters stay intact);
/// an apostrophe or hyphen joins two word characters ("don't", "well-made").
TokenizedText tokenize(std::string_view raw);

std::string detokenize(const TokenizedText& text);

/// Copy of `text` with tokens[index] replaced by `word`.
/// Throws InvalidArgument when index is out of range.
TokenizedText substitute(const TokenizedText& text, std::size_t index, std::string word);

/// ASCII lowercase; other bytes pass through.
std::string to_lower(std::string_view s);

/// True if the token contains at least one ASCII letter or non-ASCII byte.
bool has_letter(std::string_view token);

enum class Origin { original, adversarial };

std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view s);

struct LabeledExample {
  TokenizedText text;
  ClassIndex label = 0;
  Origin origin = Origin::original;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct Corpus {
  std::vector<LabeledExample> examples;
  int num_classes = 2;
  std::string name;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  /// Throws InvalidArgument if any label is out of [0, num_classes).
  void validate() const;
};

/// Reads line-delimited JSON records {"text", "label", "origin"?}.
/// Blank lines are skipped. Errors name the 1-based line number.
Corpus load_corpus(const std::filesystem::path& path, int num_classes);
Corpus parse_corpus(std::string_view content, int num_classes, std::string name = {});

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

/// Word to index map with "<unk>" reserved at index 0.
class Vocabulary {
 public:
  static constexpr std::size_t kUnkIndex = 0;

  Vocabulary();

  /// Adds the word if absent; returns its index.
  std::size_t add(std::string_view word);
  /// Index of the word, or kUnkIndex if unknown.
  std::size_t index_of(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word_at(std::size_t index) const { return words_.at(index); }
  std::size_t size() const { return words_.size(); }

  static Vocabulary build(const Corpus& corpus, bool lowercase = true);

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> words_;
};

}  // namespace wdr

#endif  // WDR_TEXT_HPP
