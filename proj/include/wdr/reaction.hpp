#ifndef WDR_REACTION_HPP
#define WDR_REACTION_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "wdr/classifier.hpp"
#include "wdr/text.hpp"

namespace wdr {

/// Default detector input length.
inline constexpr std::size_t kDefaultWdrLength = 64;

/// Word-level differential reaction on a logit vector: the logit of the
/// reference class minus the largest logit among all other classes.
/// Positive while the reference class still wins, negative once it loses.
template <class Derived>
typename Derived::Scalar differential_reaction(const Eigen::MatrixBase<Derived>& logits, ClassIndex reference) {
  return class_margin(logits, reference);
}

struct WdrRecord {
  std::size_t index = 0;
  std::string token;
  Real wdr = 0;
};

/// Fixed-length detector input. values[0, k) are the reactions sorted by
/// descending magnitude (ties by token index), k = min(true_length, L);
/// values[k, L) are exactly zero.
struct WdrVector {
  Vec values;
  std::size_t true_length = 0;
  Real baseline = 0;  // reaction of the unablated sentence

  std::size_t length() const { return static_cast<std::size_t>(values.size()); }

  /// Detector features; appends the baseline when requested.
  Vec features(bool append_baseline = false) const;
};

/// Reaction when token `index` is ablated to "<unk>", measured against the
/// class `reference` predicted on the unmodified text.
WdrRecord wdr_score(const LogitsProvider& f, const TokenizedText& text, std::size_t index, ClassIndex reference);

/// Same, with the reference class computed from f(text).
WdrRecord wdr_score(const LogitsProvider& f, const TokenizedText& text, std::size_t index);

/// Reaction of the unmodified sentence; never negative.
Real baseline_reaction(const LogitsProvider& f, const TokenizedText& text);

/// Sorts raw per-word reactions by descending |value| (index ascending on
/// ties), keeps the first `length`, zero-pads the rest.
Vec assemble_wdr_values(std::span<const Real> scores, std::size_t length);

/// All ablations of one sentence plus the baseline, issued as a single
/// batch of size n + 1.
WdrVector wdr_vector(const LogitsProvider& f, const TokenizedText& text, std::size_t length = kDefaultWdrLength);

struct LabeledWdr {
  WdrVector vector;
  Origin origin = Origin::original;
};

struct BatchWdrOptions {
  std::size_t length = kDefaultWdrLength;
  /// Sentences folded into one provider call. Results do not depend on it.
  std::size_t sentences_per_call = 1;
  /// Worker threads; each handles whole calls. Results do not depend on it.
  std::size_t threads = 1;
};

/// One vector per corpus example, in corpus order. Provider failures are
/// rethrown as ProviderError naming the failing example index.
std::vector<LabeledWdr> batch_wdr(const LogitsProvider& f, const Corpus& corpus, const BatchWdrOptions& options = {});

/// Line-delimited JSON: {"values", "true_length", "baseline", "origin"}.
std::string serialize_wdr_dataset(std::span<const LabeledWdr> rows);
std::vector<LabeledWdr> parse_wdr_dataset(std::string_view content);
void save_wdr_dataset(std::span<const LabeledWdr> rows, const std::filesystem::path& path);
std::vector<LabeledWdr> load_wdr_dataset(const std::filesystem::path& path);

}  // namespace wdr

#endif  // WDR_REACTION_HPP
