#include "wdr/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <random>
#include <set>
#include <thread>
#include <unordered_set>

#include "io_util.hpp"

namespace wdr {

namespace {

struct BudgetExhausted {};

// Wraps a provider and charges every queried text against the budget.
// A batch that would overrun the budget is refused whole.
class QueryMeter {
 public:
  QueryMeter(const LogitsProvider& f, std::size_t budget) : f_(f), budget_(budget) {}

  Mat query(std::span<const TokenizedText> texts) {
    if (used_ + texts.size() > budget_) throw BudgetExhausted{};
    used_ += texts.size();
    return predict_logits(f_, texts);
  }
  Vec query(const TokenizedText& text) { return query(std::span<const TokenizedText>(&text, 1)).row(0).transpose(); }

  std::size_t used() const { return used_; }

 private:
  const LogitsProvider& f_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

struct Target {
  std::size_t index;
  std::vector<std::string> words;  // candidates, case already matched
};

std::vector<Target> attack_targets(const TokenizedText& text, const SynonymLexicon& lexicon) {
  std::vector<Target> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& tok = text.tokens[i];
    if (!has_letter(tok) || is_stop_word(tok)) continue;
    Target t{i, {}};
    for (const auto& cand : lexicon.candidates(tok)) {
      auto w = match_case(cand, tok);
      if (w != tok && std::find(t.words.begin(), t.words.end(), w) == t.words.end()) t.words.push_back(std::move(w));
    }
    if (!t.words.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<Substitution> diff_substitutions(const TokenizedText& original, const TokenizedText& adversarial) {
  std::vector<Substitution> subs;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (original.tokens[i] != adversarial.tokens[i]) subs.push_back({i, original.tokens[i], adversarial.tokens[i]});
  }
  return subs;
}

// Shared skeleton: budget handling, precondition check and result assembly.
// `search` receives the meter, the reference class and the unattacked logits
// and returns the final text and whether the prediction flipped.
template <class Search>
AttackResult run_with_budget(const LogitsProvider& f, const LabeledExample& example, const AttackConfig& cfg,
                             Search&& search) {
  cfg.validate();
  AttackResult result;
  result.original = example;
  result.adversarial = example.text;
  QueryMeter meter(f, cfg.query_budget);
  try {
    const Vec base = meter.query(example.text);
    const ClassIndex reference = predicted_class(base);
    if (reference != example.label) {
      result.skipped = true;
    } else {
      auto [text, flipped] = search(meter, reference, base);
      if (flipped) {
        result.adversarial = std::move(text);
        result.success = true;
      }
    }
  } catch (const BudgetExhausted&) {
    result.success = false;
  }
  if (!result.success) result.adversarial = example.text;
  result.substitutions = diff_substitutions(example.text, result.adversarial);
  result.queries_used = meter.used();
  return result;
}

Real reference_probability(const Vec& logits, ClassIndex reference) { return softmax(logits)(reference); }

const std::unordered_set<std::string_view>& stop_words() {
  static const std::unordered_set<std::string_view> words = {
      "a",      "about",   "above", "after", "again", "against", "all",   "am",    "an",    "and",   "any",
      "are",    "as",      "at",    "be",    "because", "been",  "before", "being", "below", "between", "both",
      "but",    "by",      "can",   "could", "did",   "do",      "does",  "doing", "down",  "during", "each",
      "few",    "for",     "from",  "further", "had",  "has",    "have",  "having", "he",   "her",   "here",
      "hers",   "herself", "him",   "himself", "his", "how",     "i",     "if",    "in",    "into",  "is",
      "it",     "its",     "itself", "just", "me",    "more",    "most",  "my",    "myself", "no",   "nor",
      "not",    "now",     "of",    "off",   "on",    "once",    "only",  "or",    "other", "our",   "ours",
      "ourselves", "out",  "over",  "own",   "same",  "she",     "should", "so",   "some",  "such",  "than",
      "that",   "the",     "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
      "those",  "through", "to",    "too",   "under", "until",   "up",    "very",  "was",   "we",    "were",
      "what",   "when",    "where", "which", "while", "who",     "whom",  "why",   "will",  "with",  "would",
      "you",    "your",    "yours", "yourself", "yourselves"};
  return words;
}

}  // namespace

void SynonymLexicon::add(std::string_view word, std::span<const std::string> synonyms) {
  const auto key = to_lower(word);
  auto& list = entries_[key];
  for (const auto& s : synonyms) {
    auto syn = to_lower(s);
    if (syn.empty() || syn == key || tokenize(syn).size() != 1 || tokenize(syn).tokens[0] != syn) continue;
    if (std::find(list.begin(), list.end(), syn) == list.end()) list.push_back(std::move(syn));
  }
  if (list.empty()) entries_.erase(key);
}

const std::vector<std::string>& SynonymLexicon::candidates(std::string_view word) const {
  static const std::vector<std::string> kNone;
  const auto it = entries_.find(to_lower(word));
  return it == entries_.end() ? kNone : it->second;
}

SynonymLexicon SynonymLexicon::parse(std::string_view content) {
  SynonymLexicon lex;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw FormatError("lexicon line " + std::to_string(line_no) + ": expected \"word<TAB>syn1,syn2,...\"");
    }
    std::vector<std::string> syns;
    auto rest = line.substr(tab + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      auto item = rest.substr(0, comma);
      while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
      while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
      if (!item.empty()) syns.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    lex.add(line.substr(0, tab), syns);
  }
  return lex;
}

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

std::string match_case(std::string_view word, std::string_view like) {
  std::size_t letters = 0;
  std::size_t upper = 0;
  for (const auto c : like) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) ++letters;
    if (c >= 'A' && c <= 'Z') ++upper;
  }
  std::string out = to_lower(word);
  if (letters > 1 && upper == letters) {
    for (auto& c : out) {
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    }
  } else if (!like.empty() && like.front() >= 'A' && like.front() <= 'Z' && !out.empty() && out.front() >= 'a' &&
             out.front() <= 'z') {
    out.front() = static_cast<char>(out.front() - 'a' + 'A');
  }
  return out;
}

bool is_stop_word(std::string_view word) { return stop_words().contains(to_lower(word)); }

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::pwws: return "pwws";
    case AttackKind::importance: return "importance";
    case AttackKind::genetic: return "genetic";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view s) {
  if (s == "pwws") return AttackKind::pwws;
  if (s == "importance" || s == "textfooler") return AttackKind::importance;
  if (s == "genetic" || s == "iga") return AttackKind::genetic;
  throw InvalidArgument("unknown attack kind '" + std::string(s) + "' (expected pwws, importance or genetic)");
}

void AttackConfig::validate() const {
  if (!(max_substitution_fraction > 0 && max_substitution_fraction <= 1)) {
    throw InvalidArgument("attack max_substitution_fraction must lie in (0, 1]");
  }
  if (population_size == 0 || generations == 0) throw InvalidArgument("attack population/generations must be positive");
  if (!(mutation_rate > 0 && mutation_rate <= 1)) throw InvalidArgument("attack mutation_rate must lie in (0, 1]");
}

std::size_t AttackConfig::max_substitutions(std::size_t word_count) const {
  return static_cast<std::size_t>(std::ceil(max_substitution_fraction * static_cast<Real>(word_count) - 1e-12));
}

TokenizedText revert_substitutions(const AttackResult& result) {
  TokenizedText text = result.adversarial;
  for (const auto& s : result.substitutions) text = substitute(text, s.index, s.old_word);
  return text;
}

std::vector<Real> word_saliency(const LogitsProvider& f, const TokenizedText& text) {
  std::vector<TokenizedText> batch{text};
  for (std::size_t i = 0; i < text.size(); ++i) batch.push_back(substitute(text, i, std::string(kUnkToken)));
  const Mat logits = predict_logits(f, batch);
  const Vec base = logits.row(0).transpose();
  const ClassIndex reference = predicted_class(base);
  const Real p0 = reference_probability(base, reference);
  std::vector<Real> out(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    out[i] = p0 - reference_probability(logits.row(static_cast<Eigen::Index>(i + 1)).transpose(), reference);
  }
  return out;
}

AttackResult pwws_attack(const LogitsProvider& f, const LabeledExample& example, const SynonymLexicon& lexicon,
                         const AttackConfig& cfg) {
  return run_with_budget(f, example, cfg, [&](QueryMeter& meter, ClassIndex reference, const Vec& base) {
    const auto& x = example.text;
    const auto targets = attack_targets(x, lexicon);
    const std::size_t max_subs = cfg.max_substitutions(x.size());
    if (targets.empty() || max_subs == 0) return std::pair{x, false};

    const Real p0 = reference_probability(base, reference);

    std::vector<TokenizedText> ablated;
    for (const auto& t : targets) ablated.push_back(substitute(x, t.index, std::string(kUnkToken)));
    const Mat ablated_logits = meter.query(ablated);
    Vec saliency(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t k = 0; k < targets.size(); ++k) {
      saliency(static_cast<Eigen::Index>(k)) =
          p0 - reference_probability(ablated_logits.row(static_cast<Eigen::Index>(k)).transpose(), reference);
    }

    std::vector<TokenizedText> swaps;
    for (const auto& t : targets) {
      for (const auto& w : t.words) swaps.push_back(substitute(x, t.index, w));
    }
    const Mat swap_logits = meter.query(swaps);

    std::vector<Real> best_drop(targets.size());
    std::vector<std::size_t> best_word(targets.size());
    for (std::size_t k = 0, row = 0; k < targets.size(); ++k) {
      best_drop[k] = -std::numeric_limits<Real>::infinity();
      for (std::size_t w = 0; w < targets[k].words.size(); ++w, ++row) {
        const Real drop =
            p0 - reference_probability(swap_logits.row(static_cast<Eigen::Index>(row)).transpose(), reference);
        if (drop > best_drop[k]) {
          best_drop[k] = drop;
          best_word[k] = w;
        }
      }
    }

    const Vec weight = softmax(saliency);
    std::vector<std::size_t> order(targets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return best_drop[a] * weight(static_cast<Eigen::Index>(a)) > best_drop[b] * weight(static_cast<Eigen::Index>(b));
    });

    TokenizedText current = x;
    std::size_t applied = 0;
    for (const auto k : order) {
      if (applied == max_subs) break;
      if (!(best_drop[k] > 0)) continue;
      current = substitute(current, targets[k].index, targets[k].words[best_word[k]]);
      ++applied;
      if (predicted_class(meter.query(current)) != reference) return std::pair{current, true};
    }
    return std::pair{current, false};
  });
}

AttackResult importance_greedy_attack(const LogitsProvider& f, const LabeledExample& example,
                                      const SynonymLexicon& lexicon, const AttackConfig& cfg) {
  return run_with_budget(f, example, cfg, [&](QueryMeter& meter, ClassIndex reference, const Vec& base) {
    const auto& x = example.text;
    const auto targets = attack_targets(x, lexicon);
    const std::size_t max_subs = cfg.max_substitutions(x.size());
    if (targets.empty() || max_subs == 0) return std::pair{x, false};

    const Real p0 = reference_probability(base, reference);
    std::vector<TokenizedText> ablated;
    for (const auto& t : targets) ablated.push_back(substitute(x, t.index, std::string(kUnkToken)));
    const Mat ablated_logits = meter.query(ablated);
    std::vector<Real> saliency(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      saliency[k] =
          p0 - reference_probability(ablated_logits.row(static_cast<Eigen::Index>(k)).transpose(), reference);
    }
    std::vector<std::size_t> order(targets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });

    TokenizedText current = x;
    Real current_margin = class_margin(base, reference);
    std::size_t applied = 0;
    for (const auto k : order) {
      if (applied == max_subs) break;
      for (const auto& w : targets[k].words) {
        auto trial = substitute(current, targets[k].index, w);
        const Vec logits = meter.query(trial);
        const Real margin = class_margin(logits, reference);
        if (margin < current_margin) {
          current = std::move(trial);
          current_margin = margin;
          ++applied;
          if (predicted_class(logits) != reference) return std::pair{current, true};
          break;
        }
      }
    }
    return std::pair{current, false};
  });
}

AttackResult genetic_attack(const LogitsProvider& f, const LabeledExample& example, const SynonymLexicon& lexicon,
                            const AttackConfig& cfg) {
  return run_with_budget(f, example, cfg, [&](QueryMeter& meter, ClassIndex reference, const Vec&) {
    const auto& x = example.text;
    const auto targets = attack_targets(x, lexicon);
    const std::size_t max_subs = cfg.max_substitutions(x.size());
    if (targets.empty() || max_subs == 0) return std::pair{x, false};

    // An individual holds one choice per target: -1 keeps the original word.
    using Genome = std::vector<int>;
    std::mt19937_64 rng(cfg.seed);
    const std::size_t t_count = targets.size();

    auto random_word = [&](std::size_t t) {
      return static_cast<int>(uniform_index(rng, targets[t].words.size()));
    };
    auto render = [&](const Genome& g) {
      TokenizedText text = x;
      for (std::size_t t = 0; t < t_count; ++t) {
        if (g[t] >= 0) text.tokens[targets[t].index] = targets[t].words[static_cast<std::size_t>(g[t])];
      }
      return text;
    };
    auto enforce_budget = [&](Genome& g) {
      std::vector<std::size_t> changed;
      for (std::size_t t = 0; t < t_count; ++t) {
        if (g[t] >= 0) changed.push_back(t);
      }
      while (changed.size() > max_subs) {
        const auto pick = uniform_index(rng, changed.size());
        g[changed[pick]] = -1;
        changed.erase(changed.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    };

    std::map<Genome, Vec> seen;
    auto evaluate = [&](const std::vector<Genome>& pop) {
      std::vector<TokenizedText> fresh_texts;
      std::vector<Genome> fresh;
      for (const auto& g : pop) {
        if (!seen.contains(g) && std::find(fresh.begin(), fresh.end(), g) == fresh.end()) {
          fresh.push_back(g);
          fresh_texts.push_back(render(g));
        }
      }
      if (!fresh.empty()) {
        const Mat logits = meter.query(fresh_texts);
        for (std::size_t i = 0; i < fresh.size(); ++i) seen.emplace(fresh[i], logits.row(static_cast<Eigen::Index>(i)).transpose());
      }
    };

    std::vector<Genome> population(cfg.population_size, Genome(t_count, -1));
    for (auto& g : population) {
      const auto t = uniform_index(rng, t_count);
      g[t] = random_word(t);
    }

    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
      evaluate(population);
      Vec fitness(static_cast<Eigen::Index>(population.size()));
      for (std::size_t i = 0; i < population.size(); ++i) {
        fitness(static_cast<Eigen::Index>(i)) = -class_margin(seen.at(population[i]), reference);
      }

      std::size_t elite = 0;
      for (std::size_t i = 1; i < population.size(); ++i) {
        if (fitness(static_cast<Eigen::Index>(i)) > fitness(static_cast<Eigen::Index>(elite))) elite = i;
      }
      if (predicted_class(seen.at(population[elite])) != reference) return std::pair{render(population[elite]), true};
      if (gen + 1 == cfg.generations) break;

      const Vec select = softmax(fitness);
      auto sample_parent = [&]() -> const Genome& {
        const double u = uniform_unit(rng);
        double acc = 0;
        for (Eigen::Index i = 0; i < select.size(); ++i) {
          acc += select(i);
          if (u < acc) return population[static_cast<std::size_t>(i)];
        }
        return population.back();
      };

      std::vector<Genome> next{population[elite]};
      while (next.size() < cfg.population_size) {
        const Genome& a = sample_parent();
        const Genome& b = sample_parent();
        Genome child(t_count);
        for (std::size_t t = 0; t < t_count; ++t) child[t] = uniform_unit(rng) < 0.5 ? a[t] : b[t];
        for (std::size_t t = 0; t < t_count; ++t) {
          if (uniform_unit(rng) < cfg.mutation_rate) child[t] = random_word(t);
        }
        enforce_budget(child);
        next.push_back(std::move(child));
      }
      population = std::move(next);
    }
    return std::pair{x, false};
  });
}

AttackResult run_attack(AttackKind kind, const LogitsProvider& f, const LabeledExample& example,
                        const SynonymLexicon& lexicon, const AttackConfig& cfg) {
  switch (kind) {
    case AttackKind::pwws: return pwws_attack(f, example, lexicon, cfg);
    case AttackKind::importance: return importance_greedy_attack(f, example, lexicon, cfg);
    case AttackKind::genetic: return genetic_attack(f, example, lexicon, cfg);
  }
  throw InvalidArgument("unknown attack kind");
}

std::string AttackReport::to_json() const {
  nlohmann::ordered_json j;
  j["attempted"] = attempted;
  j["succeeded"] = succeeded;
  j["skipped"] = skipped;
  j["unverified"] = unverified;
  j["success_rate"] = success_rate();
  j["mean_queries"] = mean_queries;
  j["mean_substitution_rate"] = mean_substitution_rate;
  j["queries_per_sample"] = queries_per_sample;
  return j.dump(2);
}

AttackDataset generate_attack_dataset(const LogitsProvider& f, const Corpus& corpus, AttackKind kind,
                                      const SynonymLexicon& lexicon, const AttackConfig& cfg, std::size_t threads) {
  cfg.validate();
  const std::size_t n = corpus.size();
  AttackDataset out;
  out.results.resize(n);
  std::vector<std::exception_ptr> failures(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        AttackConfig sample_cfg = cfg;
        sample_cfg.seed = mix_seed(cfg.seed ^ mix_seed(i));
        LabeledExample ex = corpus.examples[i];
        ex.origin = Origin::original;
        out.results[i] = run_attack(kind, f, ex, lexicon, sample_cfg);
      } catch (const std::exception& e) {
        failures[i] = std::make_exception_ptr(ProviderError("attack failed at example " + std::to_string(i) + ": " + e.what()));
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(1, threads), std::max<std::size_t>(1, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& fail : failures) {
    if (fail) std::rethrow_exception(fail);
  }

  // Re-query every claimed flip; a provider that answers inconsistently
  // must not leak unflipped texts into the adversarial set.
  std::vector<std::size_t> claimed;
  std::vector<TokenizedText> check;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.results[i].success) {
      claimed.push_back(i);
      check.push_back(out.results[i].adversarial);
    }
  }
  constexpr std::size_t kVerifyChunk = 256;
  for (std::size_t start = 0; start < check.size(); start += kVerifyChunk) {
    const auto len = std::min(kVerifyChunk, check.size() - start);
    const Mat logits = predict_logits(f, std::span<const TokenizedText>(check).subspan(start, len));
    for (std::size_t k = 0; k < len; ++k) {
      auto& r = out.results[claimed[start + k]];
      if (predicted_class(logits.row(static_cast<Eigen::Index>(k)).transpose()) == r.original.label) {
        r.success = false;
        r.adversarial = r.original.text;
        r.substitutions.clear();
        ++out.report.unverified;
      }
    }
  }

  out.corpus.num_classes = corpus.num_classes;
  out.corpus.name = corpus.name + "+" + std::string(to_string(kind));
  auto& rep = out.report;
  rep.attempted = n;
  Real total_queries = 0;
  Real total_rate = 0;
  for (const auto& r : out.results) {
    rep.queries_per_sample.push_back(r.queries_used);
    total_queries += static_cast<Real>(r.queries_used);
    if (r.skipped) ++rep.skipped;
    if (!r.success) continue;
    ++rep.succeeded;
    total_rate += static_cast<Real>(r.substitutions.size()) / static_cast<Real>(std::max<std::size_t>(1, r.original.text.size()));
    out.corpus.examples.push_back({r.original.text, r.original.label, Origin::original});
    out.corpus.examples.push_back({r.adversarial, r.original.label, Origin::adversarial});
  }
  rep.mean_queries = n == 0 ? 0.0 : total_queries / static_cast<Real>(n);
  rep.mean_substitution_rate = rep.succeeded == 0 ? 0.0 : total_rate / static_cast<Real>(rep.succeeded);
  return out;
}

}  // namespace wdr
