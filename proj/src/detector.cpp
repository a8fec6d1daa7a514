#include "wdr/detector.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>

#include "io_util.hpp"
#include "wdr/metrics.hpp"

namespace wdr {

namespace {

// log(1 + exp(z)) without overflow.
Real softplus(Real z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Real mean_log_loss(const Vec& margin, const Vec& y) {
  Real total = 0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) total += softplus(margin(i)) - y(i) * margin(i);
  return total / static_cast<Real>(margin.size());
}

Vec targets(std::span<const Origin> labels) {
  Vec y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i] == Origin::adversarial;
  return y;
}

void check_training_input(const RowMat& x, std::span<const Origin> labels) {
  if (x.rows() == 0) throw InvalidArgument("fit_detector: empty training set");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw InvalidArgument("fit_detector: " + std::to_string(x.rows()) + " vectors but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (x.cols() == 0) throw InvalidArgument("fit_detector: zero-length feature vectors");
  const bool has_adv = std::find(labels.begin(), labels.end(), Origin::adversarial) != labels.end();
  const bool has_orig = std::find(labels.begin(), labels.end(), Origin::original) != labels.end();
  if (!has_adv || !has_orig) throw InvalidArgument("fit_detector: training data must contain both classes");
  if (!x.allFinite()) throw InvalidArgument("fit_detector: non-finite feature value");
}

int grow(const RowMat& x, std::span<const Real> grad, std::span<const Real> hess, std::vector<std::size_t> rows,
         int depth, const GbtConfig& cfg, std::vector<TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();

  SplitCandidate split;
  if (depth < cfg.max_depth && rows.size() >= 2) {
    split = find_best_split(x, grad, hess, rows, cfg.lambda, cfg.min_child_weight);
  }
  if (!split.valid()) {
    Real g = 0;
    Real h = 0;
    for (const auto r : rows) {
      g += grad[r];
      h += hess[r];
    }
    nodes[static_cast<std::size_t>(id)].weight = newton_leaf_weight(g, h, cfg.lambda, cfg.learning_rate);
    return id;
  }

  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  for (const auto r : rows) {
    (x(static_cast<Eigen::Index>(r), split.feature) < split.threshold ? left : right).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();
  const int l = grow(x, grad, hess, std::move(left), depth + 1, cfg, nodes);
  const int r = grow(x, grad, hess, std::move(right), depth + 1, cfg, nodes);
  auto& node = nodes[static_cast<std::size_t>(id)];
  node.feature = split.feature;
  node.threshold = split.threshold;
  node.gain = split.gain;
  node.left = l;
  node.right = r;
  return id;
}

nlohmann::ordered_json config_to_json(const GbtConfig& c) {
  return {{"num_trees", c.num_trees},       {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate}, {"lambda", c.lambda},
          {"min_child_weight", c.min_child_weight}, {"seed", c.seed},
          {"append_baseline", c.append_baseline}};
}

GbtConfig config_from_json(const nlohmann::json& j) {
  GbtConfig c;
  c.num_trees = j.value("num_trees", c.num_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lambda = j.value("lambda", c.lambda);
  c.min_child_weight = j.value("min_child_weight", c.min_child_weight);
  c.seed = j.value("seed", c.seed);
  c.append_baseline = j.value("append_baseline", c.append_baseline);
  return c;
}

nlohmann::ordered_json node_to_json(const Tree& tree, int id) {
  const auto& n = tree.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return {{"w", n.weight}};
  nlohmann::ordered_json j;
  j["f"] = n.feature;
  j["t"] = n.threshold;
  if (!n.default_left) j["d"] = "right";
  j["g"] = n.gain;
  j["l"] = node_to_json(tree, n.left);
  j["r"] = node_to_json(tree, n.right);
  return j;
}

int node_from_json(const nlohmann::json& j, std::size_t length, int depth, int max_depth, Tree& tree) {
  if (!j.is_object()) throw FormatError("gbt model: tree node is not an object");
  if (depth > max_depth) throw FormatError("gbt model: tree deeper than max_depth");
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  constexpr std::string_view ctx = "gbt model node";
  if (j.contains("w")) {
    tree.nodes[static_cast<std::size_t>(id)].weight = io::require<Real>(j, "w", ctx);
    return id;
  }
  const auto feature = io::require<int>(j, "f", ctx);
  const auto threshold = io::require<Real>(j, "t", ctx);
  if (feature < 0 || static_cast<std::size_t>(feature) >= length) throw FormatError("gbt model: feature index out of range");
  if (!std::isfinite(threshold)) throw FormatError("gbt model: non-finite split threshold");
  if (!j.contains("l") || !j.contains("r")) throw FormatError("gbt model: internal node lacks children");
  const int l = node_from_json(j["l"], length, depth + 1, max_depth, tree);
  const int r = node_from_json(j["r"], length, depth + 1, max_depth, tree);
  auto& n = tree.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.default_left = j.value("d", std::string("left")) != "right";
  n.gain = j.value("g", 0.0);
  n.left = l;
  n.right = r;
  return id;
}

}  // namespace

void GbtConfig::validate() const {
  if (num_trees < 1) throw InvalidArgument("gbt num_trees must be at least 1");
  if (max_depth < 1) throw InvalidArgument("gbt max_depth must be at least 1");
  if (!(learning_rate > 0 && learning_rate <= 1)) throw InvalidArgument("gbt learning_rate must lie in (0, 1]");
  if (!(lambda >= 0)) throw InvalidArgument("gbt lambda must be non-negative");
  if (!(min_child_weight >= 0)) throw InvalidArgument("gbt min_child_weight must be non-negative");
}

int Tree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

SplitCandidate find_best_split(const RowMat& x, std::span<const Real> grad, std::span<const Real> hess,
                               std::span<const std::size_t> rows, Real lambda, Real min_child_weight) {
  Real g_total = 0;
  Real h_total = 0;
  for (const auto r : rows) {
    g_total += grad[r];
    h_total += hess[r];
  }

  SplitCandidate best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    const auto value = [&](std::size_t r) { return x(static_cast<Eigen::Index>(r), f); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    Real gl = 0;
    Real hl = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      gl += grad[order[k]];
      hl += hess[order[k]];
      const Real lo = value(order[k]);
      const Real hi = value(order[k + 1]);
      if (!(lo < hi)) continue;
      const Real hr = h_total - hl;
      if (hl < min_child_weight || hr < min_child_weight) continue;
      const Real gain = split_gain(gl, hl, g_total - gl, hr, lambda);
      if (gain > best.gain) {
        Real mid = lo + (hi - lo) / 2;
        if (!(lo < mid)) mid = hi;
        best = {static_cast<int>(f), mid, gain};
      }
    }
  }
  return best;
}

Tree grow_tree(const RowMat& x, std::span<const Real> grad, std::span<const Real> hess, const GbtConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Tree tree;
  grow(x, grad, hess, std::move(rows), 0, cfg, tree.nodes);
  return tree;
}

Real DetectorModel::predict_margin(const Eigen::Ref<const Vec>& features) const {
  if (static_cast<std::size_t>(features.size()) != feature_length) {
    throw InvalidArgument("detector expects vectors of length " + std::to_string(feature_length) + ", got " +
                          std::to_string(features.size()));
  }
  Real m = base_score;
  for (const auto& t : trees) m += t.predict(features);
  return m;
}

Real DetectorModel::predict_proba(const Eigen::Ref<const Vec>& features) const {
  return sigmoid(predict_margin(features));
}

Real DetectorModel::predict_proba(const WdrVector& v) const {
  return predict_proba(v.features(config.append_baseline));
}

Vec DetectorModel::predict_proba_rows(const RowMat& x) const {
  Vec out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_proba(x.row(i).transpose());
  return out;
}

Origin classify(Real proba, Real tau) { return proba > tau ? Origin::adversarial : Origin::original; }

Origin classify(const DetectorModel& model, const WdrVector& v, Real tau) {
  if (!(tau > 0 && tau < 1)) throw InvalidArgument("decision threshold must lie in (0, 1)");
  return classify(model.predict_proba(v), tau);
}

Origin classify(const DetectorModel& model, const WdrVector& v) { return classify(model, v, model.threshold); }

RowMat design_matrix(std::span<const LabeledWdr> rows, bool append_baseline) {
  if (rows.empty()) return RowMat(0, 0);
  const auto width = rows.front().vector.features(append_baseline).size();
  RowMat x(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vec f = rows[i].vector.features(append_baseline);
    if (f.size() != width) throw InvalidArgument("inconsistent WDR vector lengths in data set");
    x.row(static_cast<Eigen::Index>(i)) = f.transpose();
  }
  return x;
}

std::vector<Origin> origins(std::span<const LabeledWdr> rows) {
  std::vector<Origin> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.origin);
  return out;
}

DetectorModel fit_detector(const RowMat& x, std::span<const Origin> labels, const GbtConfig& cfg,
                           DetectorTrainingReport* report) {
  cfg.validate();
  check_training_input(x, labels);

  DetectorModel model;
  model.config = cfg;
  model.feature_length = static_cast<std::size_t>(x.cols());
  model.base_score = 0.0;

  const Vec y = targets(labels);
  const auto n = static_cast<std::size_t>(x.rows());
  Vec margin = Vec::Constant(x.rows(), model.base_score);
  std::vector<Real> grad(n);
  std::vector<Real> hess(n);

  DetectorTrainingReport rep;
  rep.samples = n;
  rep.round_loss.push_back(mean_log_loss(margin, y));
  for (int round = 0; round < cfg.num_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const Real p = sigmoid(margin(static_cast<Eigen::Index>(i)));
      grad[i] = p - y(static_cast<Eigen::Index>(i));
      hess[i] = p * (1 - p);
    }
    Tree tree = grow_tree(x, grad, hess, cfg);
    for (Eigen::Index i = 0; i < x.rows(); ++i) margin(i) += tree.predict(x.row(i).transpose());
    model.trees.push_back(std::move(tree));
    const Real loss = mean_log_loss(margin, y);
    if (loss > rep.round_loss.back() + 1e-12) rep.loss_non_increasing = false;
    rep.round_loss.push_back(loss);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool adv = sigmoid(margin(static_cast<Eigen::Index>(i))) > model.threshold;
    correct += adv == (labels[i] == Origin::adversarial);
  }
  rep.train_accuracy = static_cast<Real>(correct) / static_cast<Real>(n);
  if (report != nullptr) *report = std::move(rep);
  return model;
}

DetectorModel fit_detector(std::span<const LabeledWdr> train, const GbtConfig& cfg, DetectorTrainingReport* report) {
  if (train.empty()) throw InvalidArgument("fit_detector: empty training set");
  const auto labels = origins(train);
  return fit_detector(design_matrix(train, cfg.append_baseline), labels, cfg, report);
}

std::string serialize_detector(const DetectorModel& model) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["kind"] = "gbt";
  doc["L"] = model.feature_length;
  doc["base"] = model.base_score;
  doc["threshold"] = model.threshold;
  doc["config"] = config_to_json(model.config);
  auto trees = nlohmann::ordered_json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
  doc["trees"] = std::move(trees);
  return doc.dump();
}

DetectorModel parse_detector(std::string_view document) {
  const auto doc = io::parse_model_document(document, "gbt");
  constexpr std::string_view ctx = "gbt model";
  DetectorModel model;
  model.feature_length = io::require<std::size_t>(doc, "L", ctx);
  model.base_score = io::require<Real>(doc, "base", ctx);
  model.threshold = io::require<Real>(doc, "threshold", ctx);
  if (model.feature_length == 0) throw FormatError("gbt model: L must be positive");
  if (!(model.threshold > 0 && model.threshold < 1)) throw FormatError("gbt model: threshold outside (0, 1)");
  if (doc.contains("config")) model.config = config_from_json(doc["config"]);
  if (!doc.contains("trees") || !doc["trees"].is_array()) throw FormatError("gbt model: missing trees array");
  for (const auto& jt : doc["trees"]) {
    Tree t;
    node_from_json(jt, model.feature_length, 0, model.config.max_depth, t);
    model.trees.push_back(std::move(t));
  }
  return model;
}

void save_detector(const DetectorModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_detector(model));
}

DetectorModel load_detector(const std::filesystem::path& path) { return parse_detector(io::read_file(path)); }

std::string FeatureImportance::to_json() const {
  nlohmann::ordered_json j;
  j["repeats"] = repeats;
  auto features = nlohmann::ordered_json::array();
  for (Eigen::Index f = 0; f < gain.size(); ++f) {
    nlohmann::ordered_json row;
    row["position"] = f + 1;
    row["gain"] = gain(f);
    row["permutation"] = permutation(f);
    std::vector<std::array<Real, 2>> points;
    points.reserve(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index i = 0; i < values.rows(); ++i) points.push_back({values(i, f), contributions(i, f)});
    row["points"] = points;
    features.push_back(std::move(row));
  }
  j["features"] = std::move(features);
  return j.dump();
}

FeatureImportance feature_importance(const DetectorModel& model, const RowMat& x, std::span<const Origin> labels,
                                     std::size_t repeats, std::uint64_t seed) {
  const auto width = static_cast<Eigen::Index>(model.feature_length);
  if (x.rows() == 0) throw InvalidArgument("feature_importance: empty evaluation set");
  if (x.cols() != width) throw InvalidArgument("feature_importance: feature length mismatch");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw InvalidArgument("feature_importance: label count mismatch");

  FeatureImportance out;
  out.repeats = repeats;
  out.gain = Vec::Zero(width);
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) out.gain(n.feature) += n.gain;
    }
  }

  // Path attribution: each split credits its feature with the change in the
  // mean tree output (over the evaluation set) between parent and child.
  out.values = x;
  out.contributions = RowMat::Zero(x.rows(), width);
  for (const auto& t : model.trees) {
    std::vector<Real> sum(t.nodes.size(), 0.0);
    std::vector<std::size_t> count(t.nodes.size(), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Real leaf = t.predict(x.row(i).transpose());
      int id = 0;
      for (;;) {
        sum[static_cast<std::size_t>(id)] += leaf;
        ++count[static_cast<std::size_t>(id)];
        const auto& n = t.nodes[static_cast<std::size_t>(id)];
        if (n.is_leaf()) break;
        id = x(i, n.feature) < n.threshold ? n.left : n.right;
      }
    }
    const auto mean = [&](int id) {
      const auto k = static_cast<std::size_t>(id);
      return count[k] == 0 ? 0.0 : sum[k] / static_cast<Real>(count[k]);
    };
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      int id = 0;
      while (!t.nodes[static_cast<std::size_t>(id)].is_leaf()) {
        const auto& n = t.nodes[static_cast<std::size_t>(id)];
        const int child = x(i, n.feature) < n.threshold ? n.left : n.right;
        out.contributions(i, n.feature) += mean(child) - mean(id);
        id = child;
      }
    }
  }

  auto macro_f1 = [&](const RowMat& data) {
    std::vector<Origin> pred;
    pred.reserve(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) pred.push_back(classify(model.predict_proba(data.row(i).transpose()), model.threshold));
    return compute_metrics(pred, labels, model.threshold).macro_f1;
  };
  const Real reference = macro_f1(x);
  out.permutation = Vec::Zero(width);
  RowMat shuffled = x;
  std::vector<Real> column(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index f = 0; f < width; ++f) {
    Real drop = 0;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      std::mt19937_64 rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(f) * 1000 + rep)));
      for (Eigen::Index i = 0; i < x.rows(); ++i) column[static_cast<std::size_t>(i)] = x(i, f);
      portable_shuffle(column, rng);
      for (Eigen::Index i = 0; i < x.rows(); ++i) shuffled(i, f) = column[static_cast<std::size_t>(i)];
      drop += reference - macro_f1(shuffled);
    }
    shuffled.col(f) = x.col(f);
    out.permutation(f) = repeats == 0 ? 0.0 : drop / static_cast<Real>(repeats);
  }
  return out;
}

Real LogisticDetector::predict_proba(const Eigen::Ref<const Vec>& features) const {
  if (features.size() != weights.size()) throw InvalidArgument("logistic detector: feature length mismatch");
  return sigmoid(weights.dot(features) + bias);
}

Vec LogisticDetector::predict_proba_rows(const RowMat& x) const {
  Vec out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_proba(x.row(i).transpose());
  return out;
}

LogisticDetector fit_logistic_detector(const RowMat& x, std::span<const Origin> labels, Real l2, int max_iter) {
  check_training_input(x, labels);
  const Vec y = targets(labels);
  const Eigen::Index d = x.cols() + 1;
  Mat a(x.rows(), d);
  a << x, Vec::Ones(x.rows());
  Vec theta = Vec::Zero(d);
  Mat penalty = l2 * Mat::Identity(d, d);
  penalty(d - 1, d - 1) = 0;
  for (int it = 0; it < max_iter; ++it) {
    const Vec z = a * theta;
    const Vec p = z.unaryExpr([](Real v) { return sigmoid(v); });
    const Vec w = (p.array() * (1 - p.array())).matrix();
    const Vec grad = a.transpose() * (p - y) + penalty * theta;
    const Mat hess = a.transpose() * w.asDiagonal() * a + penalty + 1e-9 * Mat::Identity(d, d);
    const Vec step = hess.ldlt().solve(grad);
    theta -= step;
    if (step.norm() < 1e-10) break;
  }
  return {theta.head(x.cols()), theta(d - 1)};
}

}  // namespace wdr
