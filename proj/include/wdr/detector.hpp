#ifndef WDR_DETECTOR_HPP
#define WDR_DETECTOR_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wdr/reaction.hpp"
#include "wdr/text.hpp"
#include "wdr/types.hpp"

namespace wdr {

template <class Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

struct GbtConfig {
  int num_trees = 29;
  int max_depth = 3;
  Real learning_rate = 0.34;
  Real lambda = 1.0;            // L2 penalty on leaf weights
  Real min_child_weight = 1.0;  // minimum hessian sum per child
  std::uint64_t seed = 13;
  bool append_baseline = false;  // feed the unablated reaction as an extra feature

  void validate() const;
};

/// Internal nodes route x[feature] < threshold to `left`; NaN follows
/// default_left. Leaves carry `weight`, already scaled by the learning rate.
struct TreeNode {
  int feature = -1;
  Real threshold = 0;
  int left = -1;
  int right = -1;
  bool default_left = true;
  Real weight = 0;
  Real gain = 0;  // split gain, internal nodes only

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <class Derived>
  int leaf_index(const Eigen::MatrixBase<Derived>& x) const {
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(id)];
      const Real v = x(n.feature);
      id = std::isnan(v) ? (n.default_left ? n.left : n.right) : (v < n.threshold ? n.left : n.right);
    }
    return id;
  }

  template <class Derived>
  Real predict(const Eigen::MatrixBase<Derived>& x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].weight;
  }

  int depth() const;
};

/// -sum(g) / (sum(h) + lambda), scaled by the learning rate.
inline Real newton_leaf_weight(Real sum_grad, Real sum_hess, Real lambda, Real learning_rate) {
  return -sum_grad / (sum_hess + lambda) * learning_rate;
}

/// Loss reduction of splitting (G, H) into (GL, HL) and (GR, HR).
inline Real split_gain(Real gl, Real hl, Real gr, Real hr, Real lambda) {
  const Real g = gl + gr;
  const Real h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

struct SplitCandidate {
  int feature = -1;
  Real threshold = 0;
  Real gain = 0;

  bool valid() const { return feature >= 0; }
};

/// Exact greedy split search over the given rows. Candidate thresholds are
/// midpoints between consecutive distinct values; both children must reach
/// min_child_weight hessian. Returns the first (lowest feature, lowest
/// threshold) candidate with the strictly largest positive gain, or an
/// invalid candidate if none exists.
SplitCandidate find_best_split(const RowMat& x, std::span<const Real> grad, std::span<const Real> hess,
                               std::span<const std::size_t> rows, Real lambda, Real min_child_weight);

/// Grows one regression tree on gradient statistics with depth-first
/// exact splits.
Tree grow_tree(const RowMat& x, std::span<const Real> grad, std::span<const Real> hess, const GbtConfig& cfg);

struct DetectorModel {
  std::vector<Tree> trees;
  Real base_score = 0;  // log-odds
  GbtConfig config;
  Real threshold = 0.5;
  std::size_t feature_length = kDefaultWdrLength;

  /// Log-odds of "adversarial". Throws InvalidArgument on length mismatch.
  Real predict_margin(const Eigen::Ref<const Vec>& features) const;
  Real predict_proba(const Eigen::Ref<const Vec>& features) const;
  Real predict_proba(const WdrVector& v) const;
  Vec predict_proba_rows(const RowMat& x) const;
};

/// Adversarial iff proba > tau (strict).
Origin classify(Real proba, Real tau);
Origin classify(const DetectorModel& model, const WdrVector& v, Real tau);
Origin classify(const DetectorModel& model, const WdrVector& v);

struct DetectorTrainingReport {
  std::vector<Real> round_loss;  // mean log-loss before round 1, then after each round
  bool loss_non_increasing = true;
  Real train_accuracy = 0;
  std::size_t samples = 0;
};

/// Stacks feature vectors into a row-major design matrix.
RowMat design_matrix(std::span<const LabeledWdr> rows, bool append_baseline);
std::vector<Origin> origins(std::span<const LabeledWdr> rows);

/// Newton boosting on logistic loss. Throws InvalidArgument when only one
/// class is present or shapes disagree.
DetectorModel fit_detector(const RowMat& x, std::span<const Origin> labels, const GbtConfig& cfg,
                           DetectorTrainingReport* report = nullptr);
DetectorModel fit_detector(std::span<const LabeledWdr> train, const GbtConfig& cfg,
                           DetectorTrainingReport* report = nullptr);

std::string serialize_detector(const DetectorModel& model);
DetectorModel parse_detector(std::string_view document);
void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

/// Per-position importance of the detector inputs.
struct FeatureImportance {
  Vec gain;         // total split gain per feature
  Vec permutation;  // mean macro-F1 drop over `repeats` column shuffles
  RowMat values;         // eval-set feature values, n x L
  RowMat contributions;  // per-sample log-odds change attributed to each feature
  std::size_t repeats = 5;

  std::string to_json() const;
};

FeatureImportance feature_importance(const DetectorModel& model, const RowMat& x, std::span<const Origin> labels,
                                     std::size_t repeats = 5, std::uint64_t seed = 13);

/// L2-regularized logistic regression on the same inputs, fit by Newton's
/// method. Comparison baseline for the tree ensemble.
struct LogisticDetector {
  Vec weights;
  Real bias = 0;

  Real predict_proba(const Eigen::Ref<const Vec>& features) const;
  Vec predict_proba_rows(const RowMat& x) const;
};

LogisticDetector fit_logistic_detector(const RowMat& x, std::span<const Origin> labels, Real l2 = 1e-3,
                                       int max_iter = 50);

}  // namespace wdr

#endif  // WDR_DETECTOR_HPP
