#ifndef WDR_TESTS_TEST_PROVIDERS_HPP
#define WDR_TESTS_TEST_PROVIDERS_HPP

#include <atomic>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdr/classifier.hpp"

namespace wdr::fakes {

// Answers from a fixed text -> logits table; unknown texts are an error.
class TableProvider final : public LogitsProvider {
 public:
  TableProvider(int classes, std::map<std::string, std::vector<Real>> table)
      : classes_(classes), table_(std::move(table)) {}

  int num_classes() const override { return classes_; }

  Mat query(std::span<const TokenizedText> texts) const override {
    Mat out(static_cast<Eigen::Index>(texts.size()), classes_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto key = detokenize(texts[i]);
      const auto it = table_.find(key);
      if (it == table_.end()) throw std::runtime_error("no logits for \"" + key + "\"");
      for (int c = 0; c < classes_; ++c) out(static_cast<Eigen::Index>(i), c) = it->second[static_cast<std::size_t>(c)];
    }
    return out;
  }

 private:
  int classes_;
  std::map<std::string, std::vector<Real>> table_;
};

// Forwards to another provider and counts calls and texts.
class CountingProvider final : public LogitsProvider {
 public:
  explicit CountingProvider(const LogitsProvider& inner) : inner_(inner) {}

  int num_classes() const override { return inner_.num_classes(); }

  Mat query(std::span<const TokenizedText> texts) const override {
    ++calls_;
    texts_ += texts.size();
    return inner_.query(texts);
  }

  std::size_t calls() const { return calls_; }
  std::size_t texts() const { return texts_; }

 private:
  const LogitsProvider& inner_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> texts_{0};
};

// Always fails; for error propagation tests.
class FailingProvider final : public LogitsProvider {
 public:
  int num_classes() const override { return 2; }
  Mat query(std::span<const TokenizedText>) const override { throw std::runtime_error("model offline"); }
};

}  // namespace wdr::fakes

#endif  // WDR_TESTS_TEST_PROVIDERS_HPP
