#include "wdr/text.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wdr {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_joiner(unsigned char c) { return c == '\'' || c == '-'; }

}  // namespace

TokenizedText tokenize(std::string_view raw) {
  TokenizedText out;
  out.separators.clear();

  const std::size_t n = raw.size();
  std::size_t pos = 0;
  std::size_t glue_start = 0;
  while (pos < n) {
    const auto c = static_cast<unsigned char>(raw[pos]);
    if (!is_word_byte(c)) {
      ++pos;
      continue;
    }
    out.separators.emplace_back(raw.substr(glue_start, pos - glue_start));
    std::size_t end = pos;
    while (end < n) {
      const auto d = static_cast<unsigned char>(raw[end]);
      if (is_word_byte(d)) {
        ++end;
      } else if (is_joiner(d) && end + 1 < n && is_word_byte(static_cast<unsigned char>(raw[end + 1]))) {
        end += 2;
      } else {
        break;
      }
    }
    out.tokens.emplace_back(raw.substr(pos, end - pos));
    pos = end;
    glue_start = end;
  }
  out.separators.emplace_back(raw.substr(glue_start));
  return out;
}

std::string detokenize(const TokenizedText& text) {
  std::string out;
  std::size_t total = 0;
  for (const auto& s : text.separators) total += s.size();
  for (const auto& t : text.tokens) total += t.size();
  out.reserve(total);
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    out += text.separators[i];
    out += text.tokens[i];
  }
  if (!text.separators.empty()) out += text.separators.back();
  return out;
}

TokenizedText substitute(const TokenizedText& text, std::size_t index, std::string word) {
  if (index >= text.tokens.size()) {
    throw InvalidArgument("substitute: token index " + std::to_string(index) + " out of range for " +
                          std::to_string(text.tokens.size()) + " tokens");
  }
  TokenizedText out = text;
  out.tokens[index] = std::move(word);
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool has_letter(std::string_view token) {
  for (const auto ch : token) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) return true;
  }
  return false;
}

std::string_view to_string(Origin origin) {
  return origin == Origin::original ? "original" : "adversarial";
}

Origin parse_origin(std::string_view s) {
  if (s == "original") return Origin::original;
  if (s == "adversarial") return Origin::adversarial;
  throw FormatError("unknown origin '" + std::string(s) + "'");
}

void Corpus::validate() const {
  if (num_classes < 1) throw InvalidArgument("corpus: num_classes must be positive");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto label = examples[i].label;
    if (label < 0 || label >= num_classes) {
      throw InvalidArgument("corpus example " + std::to_string(i) + ": label " + std::to_string(label) +
                            " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Corpus parse_corpus(std::string_view content, int num_classes, std::string name) {
  if (num_classes < 1) throw InvalidArgument("num_classes must be positive");
  Corpus corpus;
  corpus.num_classes = num_classes;
  corpus.name = std::move(name);

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == content.size()) break;
      continue;
    }

    const auto where = [&] { return corpus.name + " line " + std::to_string(line_no) + ": "; };
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where() + "invalid JSON (" + e.what() + ")");
    }
    if (!record.is_object()) throw FormatError(where() + "record is not a JSON object");
    if (!record.contains("text") || !record["text"].is_string()) {
      throw FormatError(where() + "missing string field \"text\"");
    }
    if (!record.contains("label") || !record["label"].is_number_integer()) {
      throw FormatError(where() + "missing integer field \"label\"");
    }
    LabeledExample ex;
    ex.text = tokenize(record["text"].get<std::string>());
    const auto label = record["label"].get<long long>();
    if (label < 0 || label >= num_classes) {
      throw FormatError(where() + "label " + std::to_string(label) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
    ex.label = static_cast<ClassIndex>(label);
    if (record.contains("origin")) {
      if (!record["origin"].is_string()) throw FormatError(where() + "\"origin\" must be a string");
      try {
        ex.origin = parse_origin(record["origin"].get<std::string>());
      } catch (const FormatError& e) {
        throw FormatError(where() + e.what());
      }
    }
    corpus.examples.push_back(std::move(ex));
    if (end == content.size()) break;
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), num_classes, path.filename().string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus.examples) {
    nlohmann::ordered_json record;
    record["text"] = detokenize(ex.text);
    record["label"] = ex.label;
    record["origin"] = to_string(ex.origin);
    out += record.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus file " + path.string());
  out << serialize_corpus(corpus);
  if (!out) throw Error("failed writing corpus file " + path.string());
}

Vocabulary::Vocabulary() { add(kUnkToken); }

std::size_t Vocabulary::add(std::string_view word) {
  const auto [it, inserted] = index_.try_emplace(std::string(word), words_.size());
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::size_t Vocabulary::index_of(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.contains(std::string(word)); }

Vocabulary Vocabulary::build(const Corpus& corpus, bool lowercase) {
  Vocabulary vocab;
  for (const auto& ex : corpus.examples) {
    for (const auto& tok : ex.text.tokens) vocab.add(lowercase ? to_lower(tok) : tok);
  }
  return vocab;
}

}  // namespace wdr
