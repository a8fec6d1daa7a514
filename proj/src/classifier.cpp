#include "wdr/classifier.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "io_util.hpp"

namespace wdr {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (const auto c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

nlohmann::ordered_json config_to_json(const ClassifierTrainConfig& c) {
  return {{"epochs", c.epochs},           {"learning_rate", c.learning_rate},
          {"l2", c.l2},                   {"feature_dim", c.feature_dim},
          {"batch_size", c.batch_size},   {"seed", c.seed}};
}

ClassifierTrainConfig config_from_json(const nlohmann::json& j) {
  ClassifierTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.l2 = j.value("l2", c.l2);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

// Row-wise log-softmax cross-entropy; returns the summed (not averaged) loss.
Real summed_cross_entropy(const Mat& logits, std::span<const ClassIndex> labels) {
  Real total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Real shift = logits.row(r).maxCoeff();
    const Real lse = shift + std::log((logits.row(r).array() - shift).exp().sum());
    total += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return total;
}

Mat linear_logits(const linear::Params& p, const SparseRowMat& x) {
  Mat z = x * p.weights.transpose();
  z.rowwise() += p.bias.transpose();
  return z;
}

}  // namespace

Mat predict_logits(const LogitsProvider& f, std::span<const TokenizedText> texts) {
  if (texts.empty()) throw InvalidArgument("predict_logits: empty batch");
  Mat out;
  try {
    out = f.query(texts);
  } catch (const ProviderError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderError("logits provider failed on a batch of " + std::to_string(texts.size()) +
                        " texts: " + e.what());
  }
  if (out.rows() != static_cast<Eigen::Index>(texts.size()) || out.cols() != f.num_classes()) {
    throw ProviderError("logits provider returned a " + std::to_string(out.rows()) + "x" +
                        std::to_string(out.cols()) + " matrix for " + std::to_string(texts.size()) +
                        " texts and " + std::to_string(f.num_classes()) + " classes");
  }
  return out;
}

Vec predict_logits(const LogitsProvider& f, const TokenizedText& text) {
  return predict_logits(f, std::span<const TokenizedText>(&text, 1)).row(0).transpose();
}

void ClassifierTrainConfig::validate() const {
  if (epochs <= 0) throw InvalidArgument("classifier epochs must be positive");
  if (!(learning_rate > 0)) throw InvalidArgument("classifier learning_rate must be positive");
  if (!(l2 > 0)) throw InvalidArgument("classifier l2 must be positive");
  if (feature_dim == 0) throw InvalidArgument("classifier feature_dim must be positive");
  if (batch_size <= 0) throw InvalidArgument("classifier batch_size must be positive");
}

FeatureHasher::FeatureHasher(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidArgument("feature dimension must be positive");
}

std::uint32_t FeatureHasher::unigram_index(std::string_view word) const {
  return static_cast<std::uint32_t>(fnv1a(to_lower(word)) % dim_);
}

std::uint32_t FeatureHasher::bigram_index(std::string_view first, std::string_view second) const {
  auto h = fnv1a(to_lower(first));
  h = fnv1a("\x1f", h);
  h = fnv1a(to_lower(second), h);
  return static_cast<std::uint32_t>(h % dim_);
}

std::vector<std::pair<std::uint32_t, Real>> FeatureHasher::features(const TokenizedText& text) const {
  std::vector<std::uint32_t> hits;
  hits.reserve(text.tokens.size() * 2);
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    hits.push_back(unigram_index(text.tokens[i]));
    if (i + 1 < text.tokens.size()) hits.push_back(bigram_index(text.tokens[i], text.tokens[i + 1]));
  }
  std::sort(hits.begin(), hits.end());

  std::vector<std::pair<std::uint32_t, Real>> out;
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    out.emplace_back(hits[i], 1.0 + std::log(static_cast<Real>(j - i)));
    i = j;
  }
  return out;
}

SparseRowMat FeatureHasher::design_matrix(std::span<const TokenizedText> texts) const {
  std::vector<Eigen::Triplet<Real>> triplets;
  for (std::size_t r = 0; r < texts.size(); ++r) {
    for (const auto& [idx, val] : features(texts[r])) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(idx), val);
    }
  }
  SparseRowMat x(static_cast<Eigen::Index>(texts.size()), dim_);
  x.setFromTriplets(triplets.begin(), triplets.end());
  return x;
}

LinearTextClassifier::LinearTextClassifier(int num_classes, std::uint32_t feature_dim, ClassifierTrainConfig config)
    : config_(config), hasher_(feature_dim) {
  if (num_classes < 2) throw InvalidArgument("classifier needs at least two classes");
  config_.feature_dim = feature_dim;
  weights_ = Mat::Zero(num_classes, feature_dim);
  bias_ = Vec::Zero(num_classes);
}

LinearTextClassifier::LinearTextClassifier(Mat weights, Vec bias, ClassifierTrainConfig config)
    : config_(config), hasher_(static_cast<std::uint32_t>(weights.cols())), weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (weights_.rows() < 2) throw InvalidArgument("classifier needs at least two classes");
  if (weights_.rows() != bias_.size()) throw InvalidArgument("classifier weight/bias class count mismatch");
  config_.feature_dim = hasher_.dim();
}

Mat LinearTextClassifier::query(std::span<const TokenizedText> texts) const {
  Mat out(static_cast<Eigen::Index>(texts.size()), bias_.size());
  for (std::size_t r = 0; r < texts.size(); ++r) {
    Vec z = bias_;
    for (const auto& [idx, val] : hasher_.features(texts[r])) z.noalias() += val * weights_.col(idx);
    out.row(static_cast<Eigen::Index>(r)) = z.transpose();
  }
  return out;
}

void LinearTextClassifier::set_word_weight(std::string_view word, ClassIndex cls, Real value) {
  weights_(cls, hasher_.unigram_index(word)) = value;
}

namespace linear {

Real loss(const Params& p, const SparseRowMat& x, std::span<const ClassIndex> labels, Real l2) {
  const Mat z = linear_logits(p, x);
  return summed_cross_entropy(z, labels) / static_cast<Real>(x.rows()) + 0.5 * l2 * p.weights.squaredNorm();
}

Params gradient(const Params& p, const SparseRowMat& x, std::span<const ClassIndex> labels, Real l2) {
  Mat z = linear_logits(p, x);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    z.row(r) = softmax(z.row(r).transpose()).transpose();
    z(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  }
  z /= static_cast<Real>(x.rows());
  Params g;
  g.weights = (x.transpose() * z).transpose() + l2 * p.weights;
  g.bias = z.colwise().sum().transpose();
  return g;
}

}  // namespace linear

LinearTextClassifier train_classifier(const Corpus& corpus, const ClassifierTrainConfig& cfg,
                                      ClassifierTrainReport* report) {
  cfg.validate();
  if (corpus.empty()) throw InvalidArgument("train_classifier: empty corpus");
  corpus.validate();

  std::vector<ClassIndex> labels;
  std::vector<TokenizedText> texts;
  labels.reserve(corpus.size());
  texts.reserve(corpus.size());
  for (const auto& ex : corpus.examples) {
    labels.push_back(ex.label);
    texts.push_back(ex.text);
  }
  {
    auto distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
      throw InvalidArgument("train_classifier: corpus must contain at least two classes");
    }
  }

  const int num_classes = std::max(corpus.num_classes, 2);
  LinearTextClassifier model(num_classes, cfg.feature_dim, cfg);
  const SparseRowMat x = model.hasher().design_matrix(texts);

  linear::Params params{Mat::Zero(num_classes, cfg.feature_dim), Vec::Zero(num_classes)};
  ClassifierTrainReport rep;
  rep.initial_loss = linear::loss(params, x, labels, cfg.l2);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  Vec z(num_classes);
  Mat residual(static_cast<Eigen::Index>(batch), num_classes);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    portable_shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const auto b = static_cast<Real>(stop - start);

      for (std::size_t k = start; k < stop; ++k) {
        const auto row = static_cast<Eigen::Index>(order[k]);
        z = params.bias;
        for (SparseRowMat::InnerIterator it(x, row); it; ++it) z.noalias() += it.value() * params.weights.col(it.col());
        Vec pr = softmax(z);
        pr(labels[order[k]]) -= 1.0;
        residual.row(static_cast<Eigen::Index>(k - start)) = pr.transpose();
      }

      const Real step = cfg.learning_rate / b;
      params.weights *= (1.0 - cfg.learning_rate * cfg.l2);
      for (std::size_t k = start; k < stop; ++k) {
        const auto row = static_cast<Eigen::Index>(order[k]);
        const auto r = residual.row(static_cast<Eigen::Index>(k - start)).transpose();
        for (SparseRowMat::InnerIterator it(x, row); it; ++it) {
          params.weights.col(it.col()).noalias() -= (step * it.value()) * r;
        }
        params.bias.noalias() -= step * r;
      }
    }
    rep.epoch_loss.push_back(linear::loss(params, x, labels, cfg.l2));
  }
  rep.final_loss = rep.epoch_loss.empty() ? rep.initial_loss : rep.epoch_loss.back();

  model.weights() = std::move(params.weights);
  model.bias() = std::move(params.bias);

  const Mat logits = model.query(texts);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (predicted_class(logits.row(r).transpose()) == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  rep.train_accuracy = static_cast<Real>(correct) / static_cast<Real>(labels.size());
  if (report != nullptr) *report = std::move(rep);
  return model;
}

std::string serialize_classifier(const LinearTextClassifier& model) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["kind"] = "linear";
  doc["num_classes"] = model.num_classes();
  doc["feature_dim"] = model.hasher().dim();
  auto weights = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < model.weights().rows(); ++c) {
    std::vector<Real> row(model.weights().row(c).begin(), model.weights().row(c).end());
    weights.push_back(std::move(row));
  }
  doc["weights"] = std::move(weights);
  doc["bias"] = std::vector<Real>(model.bias().begin(), model.bias().end());
  doc["config"] = config_to_json(model.config());
  return doc.dump();
}

void save_classifier(const LinearTextClassifier& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_classifier(model));
}

LinearTextClassifier parse_classifier(std::string_view document) {
  const auto doc = io::parse_model_document(document, "linear");
  constexpr std::string_view ctx = "linear model";
  const auto num_classes = io::require<int>(doc, "num_classes", ctx);
  const auto dim = io::require<std::uint32_t>(doc, "feature_dim", ctx);
  const auto rows = io::require<std::vector<std::vector<Real>>>(doc, "weights", ctx);
  const auto bias = io::require<std::vector<Real>>(doc, "bias", ctx);
  if (num_classes < 2 || dim == 0) throw FormatError("linear model: bad num_classes or feature_dim");
  if (rows.size() != static_cast<std::size_t>(num_classes) || bias.size() != static_cast<std::size_t>(num_classes)) {
    throw FormatError("linear model: weights/bias do not match num_classes");
  }
  Mat w(num_classes, dim);
  for (int c = 0; c < num_classes; ++c) {
    if (rows[static_cast<std::size_t>(c)].size() != dim) throw FormatError("linear model: weight row length mismatch");
    w.row(c) = Eigen::Map<const Vec>(rows[static_cast<std::size_t>(c)].data(), dim).transpose();
  }
  Vec b = Eigen::Map<const Vec>(bias.data(), num_classes);
  const auto cfg = doc.contains("config") ? config_from_json(doc["config"]) : ClassifierTrainConfig{};
  return LinearTextClassifier(std::move(w), std::move(b), cfg);
}

LinearTextClassifier load_classifier(const std::filesystem::path& path) {
  return parse_classifier(io::read_file(path));
}

}  // namespace wdr
