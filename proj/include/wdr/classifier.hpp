#ifndef WDR_CLASSIFIER_HPP
#define WDR_CLASSIFIER_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "wdr/text.hpp"
#include "wdr/types.hpp"

namespace wdr {

/// Anything that answers batched text queries with raw per-class scores.
///
/// Implementations must be deterministic (same batch, same output) and
/// must return exactly one row per input text with num_classes() columns.
/// query() may be called concurrently.
class LogitsProvider {
 public:
  virtual ~LogitsProvider() = default;

  virtual int num_classes() const = 0;
  virtual Mat query(std::span<const TokenizedText> texts) const = 0;
};

/// Calls f.query and checks the batch contract. Provider failures are
/// rethrown as ProviderError with the batch size attached.
Mat predict_logits(const LogitsProvider& f, std::span<const TokenizedText> texts);

/// Single-text convenience wrapper around predict_logits.
Vec predict_logits(const LogitsProvider& f, const TokenizedText& text);

/// Index of the largest entry; ties go to the lowest index.
template <class Derived>
ClassIndex predicted_class(const Eigen::MatrixBase<Derived>& logits) {
  if (logits.size() == 0) throw InvalidArgument("predicted_class: empty logit vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return static_cast<ClassIndex>(best);
}

/// Max-shifted softmax.
template <class Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw InvalidArgument("softmax: empty logit vector");
  const Scalar shift = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

/// logits[cls] minus the largest logit among the other classes.
template <class Derived>
typename Derived::Scalar class_margin(const Eigen::MatrixBase<Derived>& logits, ClassIndex cls) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() < 2) throw InvalidArgument("class_margin: need at least two classes");
  if (cls < 0 || cls >= logits.size()) throw InvalidArgument("class_margin: class index out of range");
  Scalar best_other = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (i != cls && logits(i) > best_other) best_other = logits(i);
  }
  return logits(cls) - best_other;
}

struct ClassifierTrainConfig {
  int epochs = 30;
  Real learning_rate = 0.5;
  Real l2 = 1e-5;
  std::uint32_t feature_dim = 1u << 18;
  int batch_size = 16;
  std::uint64_t seed = 13;

  void validate() const;
};

using SparseRowMat = Eigen::SparseMatrix<Real, Eigen::RowMajor>;

/// Hashed bag of lowercased unigrams and adjacent bigrams with 1 + ln(tf)
/// scaling per bucket.
class FeatureHasher {
 public:
  explicit FeatureHasher(std::uint32_t dim);

  std::uint32_t dim() const { return dim_; }
  std::uint32_t unigram_index(std::string_view word) const;
  std::uint32_t bigram_index(std::string_view first, std::string_view second) const;

  /// Sorted (index, value) pairs.
  std::vector<std::pair<std::uint32_t, Real>> features(const TokenizedText& text) const;
  SparseRowMat design_matrix(std::span<const TokenizedText> texts) const;

 private:
  std::uint32_t dim_;
};

/// Multinomial logistic regression over hashed n-gram features.
class LinearTextClassifier final : public LogitsProvider {
 public:
  LinearTextClassifier(int num_classes, std::uint32_t feature_dim, ClassifierTrainConfig config = {});
  LinearTextClassifier(Mat weights, Vec bias, ClassifierTrainConfig config);

  int num_classes() const override { return static_cast<int>(bias_.size()); }
  Mat query(std::span<const TokenizedText> texts) const override;

  const FeatureHasher& hasher() const { return hasher_; }
  const Mat& weights() const { return weights_; }
  const Vec& bias() const { return bias_; }
  Mat& weights() { return weights_; }
  Vec& bias() { return bias_; }
  const ClassifierTrainConfig& config() const { return config_; }

  /// Sets the weight of a single unigram for one class. Used to hand-build
  /// small models.
  void set_word_weight(std::string_view word, ClassIndex cls, Real value);

 private:
  ClassifierTrainConfig config_;
  FeatureHasher hasher_;
  Mat weights_;  // num_classes x feature_dim
  Vec bias_;
};

namespace linear {

struct Params {
  Mat weights;
  Vec bias;
};

/// Mean cross-entropy over rows of x plus (l2 / 2) * ||weights||^2.
Real loss(const Params& p, const SparseRowMat& x, std::span<const ClassIndex> labels, Real l2);

/// Analytic gradient of loss() with respect to weights and bias.
Params gradient(const Params& p, const SparseRowMat& x, std::span<const ClassIndex> labels, Real l2);

}  // namespace linear

struct ClassifierTrainReport {
  Real initial_loss = 0;
  Real final_loss = 0;
  Real train_accuracy = 0;
  std::vector<Real> epoch_loss;
};

/// Mini-batch gradient descent from zero weights. Deterministic given
/// cfg.seed. Throws InvalidArgument on an empty or single-class corpus.
LinearTextClassifier train_classifier(const Corpus& corpus, const ClassifierTrainConfig& cfg,
                                      ClassifierTrainReport* report = nullptr);

void save_classifier(const LinearTextClassifier& model, const std::filesystem::path& path);
std::string serialize_classifier(const LinearTextClassifier& model);
LinearTextClassifier load_classifier(const std::filesystem::path& path);
LinearTextClassifier parse_classifier(std::string_view document);

}  // namespace wdr

#endif  // WDR_CLASSIFIER_HPP
