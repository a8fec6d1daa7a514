#include "wdr/reaction.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <thread>

#include "io_util.hpp"

namespace wdr {

namespace {

std::vector<TokenizedText> ablation_batch(const TokenizedText& text) {
  std::vector<TokenizedText> batch;
  batch.reserve(text.size() + 1);
  batch.push_back(text);
  for (std::size_t i = 0; i < text.size(); ++i) batch.push_back(substitute(text, i, std::string(kUnkToken)));
  return batch;
}

// `block` holds the unablated logits in row 0 and ablation i in row i + 1.
WdrVector vector_from_block(const Eigen::Ref<const Mat>& block, std::size_t length) {
  const Vec base = block.row(0).transpose();
  const ClassIndex reference = predicted_class(base);
  const auto n = static_cast<std::size_t>(block.rows() - 1);
  std::vector<Real> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = differential_reaction(block.row(static_cast<Eigen::Index>(i + 1)).transpose(), reference);
  }
  WdrVector out;
  out.values = assemble_wdr_values(scores, length);
  out.true_length = n;
  out.baseline = differential_reaction(base, reference);
  return out;
}

}  // namespace

Vec WdrVector::features(bool append_baseline) const {
  if (!append_baseline) return values;
  Vec out(values.size() + 1);
  out << values, baseline;
  return out;
}

WdrRecord wdr_score(const LogitsProvider& f, const TokenizedText& text, std::size_t index, ClassIndex reference) {
  if (index >= text.size()) {
    throw InvalidArgument("wdr_score: token index " + std::to_string(index) + " out of range for " +
                          std::to_string(text.size()) + " words");
  }
  const Vec ablated = predict_logits(f, substitute(text, index, std::string(kUnkToken)));
  return {index, text.tokens[index], differential_reaction(ablated, reference)};
}

WdrRecord wdr_score(const LogitsProvider& f, const TokenizedText& text, std::size_t index) {
  return wdr_score(f, text, index, predicted_class(predict_logits(f, text)));
}

Real baseline_reaction(const LogitsProvider& f, const TokenizedText& text) {
  const Vec logits = predict_logits(f, text);
  return differential_reaction(logits, predicted_class(logits));
}

Vec assemble_wdr_values(std::span<const Real> scores, std::size_t length) {
  if (length == 0) throw InvalidArgument("WDR vector length must be at least 1");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(scores[a]) > std::abs(scores[b]); });
  Vec out = Vec::Zero(static_cast<Eigen::Index>(length));
  const std::size_t keep = std::min(length, scores.size());
  for (std::size_t k = 0; k < keep; ++k) out(static_cast<Eigen::Index>(k)) = scores[order[k]];
  return out;
}

WdrVector wdr_vector(const LogitsProvider& f, const TokenizedText& text, std::size_t length) {
  if (length == 0) throw InvalidArgument("WDR vector length must be at least 1");
  const auto batch = ablation_batch(text);
  return vector_from_block(predict_logits(f, batch), length);
}

std::vector<LabeledWdr> batch_wdr(const LogitsProvider& f, const Corpus& corpus, const BatchWdrOptions& options) {
  if (options.length == 0) throw InvalidArgument("WDR vector length must be at least 1");
  const std::size_t per_call = std::max<std::size_t>(1, options.sentences_per_call);
  const std::size_t n = corpus.size();
  const std::size_t calls = (n + per_call - 1) / per_call;
  std::vector<LabeledWdr> out(n);
  std::vector<std::exception_ptr> failures(calls);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < calls; c = next++) {
      const std::size_t first = c * per_call;
      const std::size_t last = std::min(n, first + per_call);
      try {
        std::vector<TokenizedText> texts;
        std::vector<std::size_t> offsets;
        for (std::size_t e = first; e < last; ++e) {
          offsets.push_back(texts.size());
          auto batch = ablation_batch(corpus.examples[e].text);
          std::move(batch.begin(), batch.end(), std::back_inserter(texts));
        }
        offsets.push_back(texts.size());
        const Mat logits = predict_logits(f, texts);
        for (std::size_t e = first; e < last; ++e) {
          const auto k = e - first;
          const auto rows = static_cast<Eigen::Index>(offsets[k + 1] - offsets[k]);
          out[e].vector = vector_from_block(logits.middleRows(static_cast<Eigen::Index>(offsets[k]), rows),
                                            options.length);
          out[e].origin = corpus.examples[e].origin;
        }
      } catch (const std::exception& ex) {
        const std::string where = last - first == 1 ? "example " + std::to_string(first)
                                                    : "examples " + std::to_string(first) + ".." +
                                                          std::to_string(last - 1);
        failures[c] = std::make_exception_ptr(ProviderError("WDR computation failed at " + where + ": " + ex.what()));
      }
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(1, options.threads), std::max<std::size_t>(1, calls));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& fail : failures) {
    if (fail) std::rethrow_exception(fail);
  }
  return out;
}

std::string serialize_wdr_dataset(std::span<const LabeledWdr> rows) {
  std::string out;
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["values"] = std::vector<Real>(row.vector.values.begin(), row.vector.values.end());
    j["true_length"] = row.vector.true_length;
    j["baseline"] = row.vector.baseline;
    j["origin"] = to_string(row.origin);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<LabeledWdr> parse_wdr_dataset(std::string_view content) {
  std::vector<LabeledWdr> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::size_t expected_length = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    const std::string ctx = "WDR dataset line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(ctx + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw FormatError(ctx + ": record is not a JSON object");
    const auto values = io::require<std::vector<Real>>(j, "values", ctx);
    if (values.empty()) throw FormatError(ctx + ": empty values");
    if (expected_length == 0) expected_length = values.size();
    if (values.size() != expected_length) {
      throw FormatError(ctx + ": vector length " + std::to_string(values.size()) + " differs from " +
                        std::to_string(expected_length));
    }
    LabeledWdr row;
    row.vector.values = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
    row.vector.true_length = io::require<std::size_t>(j, "true_length", ctx);
    row.vector.baseline = io::require<Real>(j, "baseline", ctx);
    try {
      row.origin = parse_origin(io::require<std::string>(j, "origin", ctx));
    } catch (const FormatError& e) {
      throw FormatError(ctx + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_wdr_dataset(std::span<const LabeledWdr> rows, const std::filesystem::path& path) {
  io::write_file(path, serialize_wdr_dataset(rows));
}

std::vector<LabeledWdr> load_wdr_dataset(const std::filesystem::path& path) {
  return parse_wdr_dataset(io::read_file(path));
}

}  // namespace wdr
