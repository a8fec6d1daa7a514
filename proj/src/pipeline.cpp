#include "wdr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>

#include "io_util.hpp"

namespace wdr {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

fs::path or_default(const fs::path& p, const fs::path& out_dir, const char* name) {
  return p.empty() ? out_dir / name : p;
}

void check_keys(const json& given, const json& defaults, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string dotted = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + dotted + "'");
    if (value.is_object() && defaults[key].is_object()) check_keys(value, defaults[key], dotted);
  }
}

template <class T>
T get(const json& root, const std::string& dotted) {
  const json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("missing config key '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + dotted + "' has the wrong type (" + node->dump() + ")");
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void require_input(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw MissingArtifactError(p, producer);
}

void require_user_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("paths.") + what + " is not set");
  if (!fs::exists(p)) throw ConfigError(std::string("paths.") + what + " refers to missing file " + p.string());
}

CommandOutcome finish(const PipelineConfig& cfg, std::string_view command, std::string summary, ordered_json report) {
  CommandOutcome out;
  ordered_json head{{"command", command}, {"summary", summary}};
  head.update(report);
  report = std::move(head);
  out.report_path = cfg.paths.report_path(command);
  ensure_parent(out.report_path);
  io::write_file(out.report_path, report.dump(2) + "\n");
  out.summary = std::move(summary);
  out.report = std::move(report);
  return out;
}

std::string fmt(Real v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<LabeledWdr> eval_rows(const PipelineConfig& cfg) {
  const auto path = cfg.paths.eval_wdr_path();
  require_input(path, cfg.paths.eval_wdr.empty() ? "train-detector" : "wdr");
  auto rows = load_wdr_dataset(path);
  if (rows.empty()) throw InvalidArgument("evaluation set " + path.string() + " is empty");
  return rows;
}

DetectorModel load_frozen_detector(const PipelineConfig& cfg) {
  require_input(cfg.paths.detector_path(), "train-detector");
  return load_detector(cfg.paths.detector_path());
}

void warn_if_unbalanced(const MetricsReport& m, const std::string& what) {
  if (m.unbalanced) {
    std::cerr << "warning: " << what << " is unbalanced (" << m.counts.adversarial() << " adversarial / "
              << m.counts.original() << " original)\n";
  }
}

}  // namespace

fs::path PipelinePaths::classifier_path() const { return or_default(classifier, out_dir, "classifier.json"); }
fs::path PipelinePaths::attacked_path() const { return or_default(attacked, out_dir, "attacked.jsonl"); }
fs::path PipelinePaths::wdr_path() const { return or_default(wdr, out_dir, "wdr.jsonl"); }
fs::path PipelinePaths::detector_path() const { return or_default(detector, out_dir, "detector.json"); }
fs::path PipelinePaths::heldout_path() const { return or_default(heldout, out_dir, "wdr_heldout.jsonl"); }
fs::path PipelinePaths::eval_wdr_path() const { return eval_wdr.empty() ? heldout_path() : eval_wdr; }
fs::path PipelinePaths::report_path(std::string_view command) const {
  return out_dir / "reports" / (std::string(command) + ".json");
}

ordered_json default_config_json() {
  const PipelineConfig d;
  ordered_json j;
  j["seed"] = d.seed;
  j["num_classes"] = d.num_classes;
  j["paths"] = {{"train_corpus", "data/toy_train.jsonl"},
                {"attack_corpus", "data/toy_attack.jsonl"},
                {"lexicon", "data/lexicon.tsv"},
                {"out_dir", d.paths.out_dir.string()},
                {"classifier", ""},
                {"attacked", ""},
                {"wdr", ""},
                {"detector", ""},
                {"heldout", ""},
                {"eval_wdr", ""}};
  j["provider"] = {{"kind", d.provider.kind},
                   {"url", ""},
                   {"timeout_ms", d.provider.remote.timeout.count()},
                   {"max_batch_size", d.provider.remote.max_batch_size},
                   {"retries", d.provider.remote.retries},
                   {"max_in_flight", d.provider.remote.max_in_flight}};
  j["classifier"] = {{"epochs", d.classifier.epochs},
                     {"learning_rate", d.classifier.learning_rate},
                     {"l2", d.classifier.l2},
                     {"feature_dim", d.classifier.feature_dim},
                     {"batch_size", d.classifier.batch_size}};
  j["attack"] = {{"kind", to_string(d.attack_kind)},
                 {"max_substitution_fraction", d.attack.max_substitution_fraction},
                 {"query_budget", d.attack.query_budget},
                 {"population_size", d.attack.population_size},
                 {"generations", d.attack.generations},
                 {"mutation_rate", d.attack.mutation_rate},
                 {"threads", d.attack_threads}};
  j["wdr"] = {{"length", d.wdr.length}, {"sentences_per_call", d.wdr.sentences_per_call}, {"threads", d.wdr.threads}};
  j["detector"] = {{"num_trees", d.detector.num_trees},
                   {"max_depth", d.detector.max_depth},
                   {"learning_rate", d.detector.learning_rate},
                   {"lambda", d.detector.lambda},
                   {"min_child_weight", d.detector.min_child_weight},
                   {"append_baseline", d.detector.append_baseline},
                   {"test_fraction", d.test_fraction}};
  j["threshold"] = d.threshold;
  j["sweep"] = {{"thresholds", d.sweep_thresholds}};
  j["transfer"] = {{"train", {{"model", "builtin"}, {"dataset", "toy"}, {"attack", "pwws"}}},
                   {"tests", json::array()}};
  j["explain"] = {{"repeats", d.explain_repeats}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& user) {
  const json defaults = default_config_json();
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(user, defaults, "");
  json j = defaults;
  j.merge_patch(user);

  PipelineConfig c;
  c.seed = get<std::uint64_t>(j, "seed");
  c.num_classes = get<int>(j, "num_classes");
  if (c.num_classes < 2) throw ConfigError("num_classes must be at least 2");

  c.paths.train_corpus = get<std::string>(j, "paths.train_corpus");
  c.paths.attack_corpus = get<std::string>(j, "paths.attack_corpus");
  c.paths.lexicon = get<std::string>(j, "paths.lexicon");
  c.paths.out_dir = get<std::string>(j, "paths.out_dir");
  c.paths.classifier = get<std::string>(j, "paths.classifier");
  c.paths.attacked = get<std::string>(j, "paths.attacked");
  c.paths.wdr = get<std::string>(j, "paths.wdr");
  c.paths.detector = get<std::string>(j, "paths.detector");
  c.paths.heldout = get<std::string>(j, "paths.heldout");
  c.paths.eval_wdr = get<std::string>(j, "paths.eval_wdr");
  if (c.paths.out_dir.empty()) throw ConfigError("paths.out_dir must not be empty");

  c.provider.kind = get<std::string>(j, "provider.kind");
  if (c.provider.kind != "builtin" && c.provider.kind != "remote") {
    throw ConfigError("provider.kind must be \"builtin\" or \"remote\"");
  }
  c.provider.remote.base_url = get<std::string>(j, "provider.url");
  c.provider.remote.num_classes = c.num_classes;
  c.provider.remote.timeout = std::chrono::milliseconds(get<long long>(j, "provider.timeout_ms"));
  c.provider.remote.max_batch_size = get<std::size_t>(j, "provider.max_batch_size");
  c.provider.remote.retries = get<int>(j, "provider.retries");
  c.provider.remote.max_in_flight = get<std::size_t>(j, "provider.max_in_flight");

  c.classifier.epochs = get<int>(j, "classifier.epochs");
  c.classifier.learning_rate = get<Real>(j, "classifier.learning_rate");
  c.classifier.l2 = get<Real>(j, "classifier.l2");
  c.classifier.feature_dim = get<std::uint32_t>(j, "classifier.feature_dim");
  c.classifier.batch_size = get<int>(j, "classifier.batch_size");
  c.classifier.seed = c.seed;

  try {
    c.attack_kind = parse_attack_kind(get<std::string>(j, "attack.kind"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("attack.kind: ") + e.what());
  }
  c.attack.max_substitution_fraction = get<Real>(j, "attack.max_substitution_fraction");
  c.attack.query_budget = get<std::size_t>(j, "attack.query_budget");
  c.attack.population_size = get<std::size_t>(j, "attack.population_size");
  c.attack.generations = get<std::size_t>(j, "attack.generations");
  c.attack.mutation_rate = get<Real>(j, "attack.mutation_rate");
  c.attack.seed = c.seed;
  c.attack_threads = get<std::size_t>(j, "attack.threads");

  c.wdr.length = get<std::size_t>(j, "wdr.length");
  c.wdr.sentences_per_call = get<std::size_t>(j, "wdr.sentences_per_call");
  c.wdr.threads = get<std::size_t>(j, "wdr.threads");
  if (c.wdr.length == 0) throw ConfigError("wdr.length must be at least 1");

  c.detector.num_trees = get<int>(j, "detector.num_trees");
  c.detector.max_depth = get<int>(j, "detector.max_depth");
  c.detector.learning_rate = get<Real>(j, "detector.learning_rate");
  c.detector.lambda = get<Real>(j, "detector.lambda");
  c.detector.min_child_weight = get<Real>(j, "detector.min_child_weight");
  c.detector.append_baseline = get<bool>(j, "detector.append_baseline");
  c.detector.seed = c.seed;
  c.test_fraction = get<Real>(j, "detector.test_fraction");
  if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("detector.test_fraction must lie in (0, 1)");

  c.threshold = get<Real>(j, "threshold");
  if (!(c.threshold > 0 && c.threshold < 1)) throw ConfigError("threshold must lie in (0, 1)");
  c.sweep_thresholds = get<std::vector<Real>>(j, "sweep.thresholds");
  for (const auto t : c.sweep_thresholds) {
    if (!(t > 0 && t < 1)) throw ConfigError("sweep.thresholds entries must lie in (0, 1)");
  }

  c.transfer.train.model = get<std::string>(j, "transfer.train.model");
  c.transfer.train.dataset = get<std::string>(j, "transfer.train.dataset");
  c.transfer.train.attack = get<std::string>(j, "transfer.train.attack");
  const auto& tests = j["transfer"]["tests"];
  if (!tests.is_array()) throw ConfigError("transfer.tests must be an array");
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto& t = tests[i];
    const std::string ctx = "transfer.tests[" + std::to_string(i) + "]";
    if (!t.is_object()) throw ConfigError(ctx + " must be an object");
    for (const auto& [key, _] : t.items()) {
      if (key != "model" && key != "dataset" && key != "attack" && key != "wdr") {
        throw ConfigError("unknown config key '" + ctx + "." + key + "'");
      }
    }
    TransferTestSpec spec;
    spec.config.model = t.value("model", c.transfer.train.model);
    spec.config.dataset = t.value("dataset", c.transfer.train.dataset);
    spec.config.attack = t.value("attack", c.transfer.train.attack);
    if (!t.contains("wdr") || !t["wdr"].is_string()) throw ConfigError(ctx + ".wdr must name a WDR dataset file");
    spec.wdr = t["wdr"].get<std::string>();
    c.transfer.tests.push_back(std::move(spec));
  }
  c.explain_repeats = get<std::size_t>(j, "explain.repeats");
  return c;
}

ordered_json PipelineConfig::to_json() const {
  ordered_json j = default_config_json();
  j["seed"] = seed;
  j["num_classes"] = num_classes;
  j["paths"] = {{"train_corpus", paths.train_corpus.string()}, {"attack_corpus", paths.attack_corpus.string()},
                {"lexicon", paths.lexicon.string()},           {"out_dir", paths.out_dir.string()},
                {"classifier", paths.classifier.string()},     {"attacked", paths.attacked.string()},
                {"wdr", paths.wdr.string()},                   {"detector", paths.detector.string()},
                {"heldout", paths.heldout.string()},           {"eval_wdr", paths.eval_wdr.string()}};
  j["provider"] = {{"kind", provider.kind},
                   {"url", provider.remote.base_url},
                   {"timeout_ms", provider.remote.timeout.count()},
                   {"max_batch_size", provider.remote.max_batch_size},
                   {"retries", provider.remote.retries},
                   {"max_in_flight", provider.remote.max_in_flight}};
  j["classifier"] = {{"epochs", classifier.epochs},
                     {"learning_rate", classifier.learning_rate},
                     {"l2", classifier.l2},
                     {"feature_dim", classifier.feature_dim},
                     {"batch_size", classifier.batch_size}};
  j["attack"] = {{"kind", to_string(attack_kind)},
                 {"max_substitution_fraction", attack.max_substitution_fraction},
                 {"query_budget", attack.query_budget},
                 {"population_size", attack.population_size},
                 {"generations", attack.generations},
                 {"mutation_rate", attack.mutation_rate},
                 {"threads", attack_threads}};
  j["wdr"] = {{"length", wdr.length}, {"sentences_per_call", wdr.sentences_per_call}, {"threads", wdr.threads}};
  j["detector"] = {{"num_trees", detector.num_trees},
                   {"max_depth", detector.max_depth},
                   {"learning_rate", detector.learning_rate},
                   {"lambda", detector.lambda},
                   {"min_child_weight", detector.min_child_weight},
                   {"append_baseline", detector.append_baseline},
                   {"test_fraction", test_fraction}};
  j["threshold"] = threshold;
  j["sweep"] = {{"thresholds", sweep_thresholds}};
  auto tests = ordered_json::array();
  for (const auto& t : transfer.tests) {
    tests.push_back({{"model", t.config.model}, {"dataset", t.config.dataset}, {"attack", t.config.attack},
                     {"wdr", t.wdr.string()}});
  }
  j["transfer"] = {{"train", {{"model", transfer.train.model}, {"dataset", transfer.train.dataset},
                              {"attack", transfer.train.attack}}},
                   {"tests", std::move(tests)}};
  j["explain"] = {{"repeats", explain_repeats}};
  return j;
}

void apply_override(json& config, std::string_view dotted, std::string_view value) {
  if (dotted.empty()) throw ConfigError("empty override key");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = std::string(value);
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (key.empty()) throw ConfigError("malformed override key '" + std::string(dotted) + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string_view::npos) {
      (*node)[key] = std::move(parsed);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json load_config_json(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  try {
    return json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::unique_ptr<LogitsProvider> make_provider(const PipelineConfig& cfg) {
  if (cfg.provider.kind == "remote") {
    return std::make_unique<RemoteLogitsClient>(cfg.provider.remote);
  }
  require_input(cfg.paths.classifier_path(), "train-classifier");
  auto model = load_classifier(cfg.paths.classifier_path());
  if (model.num_classes() != cfg.num_classes) {
    throw ConfigError("classifier has " + std::to_string(model.num_classes()) + " classes, config says " +
                      std::to_string(cfg.num_classes));
  }
  return std::make_unique<LinearTextClassifier>(std::move(model));
}

void stratified_split(std::span<const LabeledWdr> rows, Real test_fraction, std::uint64_t seed,
                      std::vector<LabeledWdr>& train, std::vector<LabeledWdr>& test) {
  train.clear();
  test.clear();
  std::vector<bool> in_test(rows.size(), false);
  std::mt19937_64 rng(mix_seed(seed));
  for (const auto origin : {Origin::original, Origin::adversarial}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].origin == origin) idx.push_back(i);
    }
    portable_shuffle(idx, rng);
    const auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<Real>(idx.size())));
    for (std::size_t k = 0; k < take && k < idx.size(); ++k) in_test[idx[k]] = true;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) (in_test[i] ? test : train).push_back(rows[i]);
}

std::string file_digest(const fs::path& path) {
  const auto bytes = io::read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CommandOutcome cmd_train_classifier(const PipelineConfig& cfg) {
  require_user_file(cfg.paths.train_corpus, "train_corpus");
  const auto corpus = load_corpus(cfg.paths.train_corpus, cfg.num_classes);
  ClassifierTrainReport rep;
  const auto model = train_classifier(corpus, cfg.classifier, &rep);
  const auto out = cfg.paths.classifier_path();
  ensure_parent(out);
  save_classifier(model, out);

  ordered_json report{{"examples", corpus.size()},
                      {"initial_loss", rep.initial_loss},
                      {"final_loss", rep.final_loss},
                      {"train_accuracy", rep.train_accuracy},
                      {"epoch_loss", rep.epoch_loss},
                      {"output", out.string()}};
  return finish(cfg, "train-classifier",
                "train-classifier: " + std::to_string(corpus.size()) + " examples, train accuracy " +
                    fmt(rep.train_accuracy) + ", wrote " + out.string(),
                std::move(report));
}

CommandOutcome cmd_attack(const PipelineConfig& cfg) {
  require_user_file(cfg.paths.attack_corpus, "attack_corpus");
  require_user_file(cfg.paths.lexicon, "lexicon");
  const auto provider = make_provider(cfg);
  const auto corpus = load_corpus(cfg.paths.attack_corpus, cfg.num_classes);
  const auto lexicon = SynonymLexicon::load(cfg.paths.lexicon);

  const auto data = generate_attack_dataset(*provider, corpus, cfg.attack_kind, lexicon, cfg.attack, cfg.attack_threads);
  const auto out = cfg.paths.attacked_path();
  ensure_parent(out);
  save_corpus(data.corpus, out);

  auto report = ordered_json::parse(data.report.to_json());
  report["kind"] = to_string(cfg.attack_kind);
  report["output"] = out.string();
  return finish(cfg, "attack",
                "attack(" + std::string(to_string(cfg.attack_kind)) + "): " + std::to_string(data.report.succeeded) +
                    "/" + std::to_string(data.report.attempted) + " succeeded (" + std::to_string(data.report.skipped) +
                    " skipped), wrote " + std::to_string(data.corpus.size()) + " examples to " + out.string(),
                std::move(report));
}

CommandOutcome cmd_wdr(const PipelineConfig& cfg) {
  const auto in = cfg.paths.attacked_path();
  require_input(in, "attack");
  const auto provider = make_provider(cfg);
  const auto corpus = load_corpus(in, cfg.num_classes);
  const auto rows = batch_wdr(*provider, corpus, cfg.wdr);
  const auto out = cfg.paths.wdr_path();
  ensure_parent(out);
  save_wdr_dataset(rows, out);

  std::size_t adversarial = 0;
  for (const auto& r : rows) adversarial += r.origin == Origin::adversarial;
  ordered_json report{{"rows", rows.size()},
                      {"adversarial", adversarial},
                      {"original", rows.size() - adversarial},
                      {"length", cfg.wdr.length},
                      {"output", out.string()}};
  return finish(cfg, "wdr",
                "wdr: " + std::to_string(rows.size()) + " vectors of length " + std::to_string(cfg.wdr.length) +
                    ", wrote " + out.string(),
                std::move(report));
}

CommandOutcome cmd_train_detector(const PipelineConfig& cfg) {
  const auto in = cfg.paths.wdr_path();
  require_input(in, "wdr");
  const auto rows = load_wdr_dataset(in);
  std::vector<LabeledWdr> train;
  std::vector<LabeledWdr> test;
  stratified_split(rows, cfg.test_fraction, cfg.seed, train, test);

  DetectorTrainingReport rep;
  auto model = fit_detector(train, cfg.detector, &rep);
  model.threshold = cfg.threshold;
  const auto out = cfg.paths.detector_path();
  ensure_parent(out);
  save_detector(model, out);
  const auto heldout = cfg.paths.heldout_path();
  ensure_parent(heldout);
  save_wdr_dataset(test, heldout);

  ordered_json report{{"train_rows", train.size()},
                      {"heldout_rows", test.size()},
                      {"round_loss", rep.round_loss},
                      {"loss_non_increasing", rep.loss_non_increasing},
                      {"train_accuracy", rep.train_accuracy},
                      {"output", out.string()},
                      {"heldout", heldout.string()}};
  std::string summary = "train-detector: " + std::to_string(model.trees.size()) + " trees on " +
                        std::to_string(train.size()) + " vectors, train accuracy " + fmt(rep.train_accuracy);
  if (!test.empty()) {
    const auto m = evaluate_detector(model, test);
    report["heldout_metrics"] = m.to_json();
    summary += ", held-out F1 " + fmt(m.macro_f1);
  }
  summary += ", wrote " + out.string();
  return finish(cfg, "train-detector", std::move(summary), std::move(report));
}

CommandOutcome cmd_evaluate(const PipelineConfig& cfg) {
  const auto model = load_frozen_detector(cfg);
  const auto rows = eval_rows(cfg);
  const auto m = evaluate_detector(model, rows, cfg.threshold);
  warn_if_unbalanced(m, "evaluation set");
  auto report = m.to_json();
  report["input"] = cfg.paths.eval_wdr_path().string();
  return finish(cfg, "evaluate",
                "evaluate: tau " + fmt(cfg.threshold, 2) + ", F1 " + fmt(m.macro_f1) + ", adv recall " +
                    fmt(m.adv_recall) + ", orig recall " + fmt(m.orig_recall) + " on " +
                    std::to_string(m.counts.total()) + " samples",
                std::move(report));
}

CommandOutcome cmd_sweep(const PipelineConfig& cfg) {
  const auto model = load_frozen_detector(cfg);
  const auto rows = eval_rows(cfg);
  const auto reports = threshold_sweep(model, rows, cfg.sweep_thresholds);
  if (!reports.empty()) warn_if_unbalanced(reports.front(), "evaluation set");
  for (const auto& r : reports) {
    std::cerr << "tau " << fmt(r.threshold, 2) << "  precision " << fmt(r.precision_adv) << "  F1 " << fmt(r.macro_f1)
              << "  adv recall " << fmt(r.adv_recall) << "  orig recall " << fmt(r.orig_recall) << "\n";
  }
  auto report = sweep_to_json(reports);
  report["input"] = cfg.paths.eval_wdr_path().string();
  return finish(cfg, "sweep", "sweep: " + std::to_string(reports.size()) + " thresholds on " +
                                  std::to_string(rows.size()) + " samples",
                std::move(report));
}

CommandOutcome cmd_transfer(const PipelineConfig& cfg) {
  if (cfg.transfer.tests.empty()) throw ConfigError("transfer.tests is empty; list at least one test configuration");
  const auto model = load_frozen_detector(cfg);
  const auto digest_before = file_digest(cfg.paths.detector_path());
  const auto rows = run_transfer_matrix(model, cfg.transfer);
  const auto digest_after = file_digest(cfg.paths.detector_path());

  for (const auto& r : rows) {
    warn_if_unbalanced(r.metrics, "transfer set " + describe(r.config));
    std::cerr << describe(r.config) << "  F1 " << fmt(r.metrics.macro_f1) << "  adv recall "
              << fmt(r.metrics.adv_recall) << "  n " << r.metrics.counts.total() << "\n";
  }
  auto report = transfer_to_json(rows);
  report["train"] = {{"model", cfg.transfer.train.model},
                     {"dataset", cfg.transfer.train.dataset},
                     {"attack", cfg.transfer.train.attack}};
  report["detector_digest_before"] = digest_before;
  report["detector_digest_after"] = digest_after;
  return finish(cfg, "transfer", "transfer: evaluated frozen detector on " + std::to_string(rows.size()) +
                                     " configuration(s)",
                std::move(report));
}

CommandOutcome cmd_explain(const PipelineConfig& cfg) {
  const auto model = load_frozen_detector(cfg);
  const auto rows = eval_rows(cfg);
  const auto x = design_matrix(rows, model.config.append_baseline);
  const auto labels = origins(rows);
  const auto fi = feature_importance(model, x, labels, cfg.explain_repeats, cfg.seed);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(fi.gain.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fi.gain(a) > fi.gain(b); });
  std::vector<Eigen::Index> top;
  for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) top.push_back(order[k] + 1);
  const bool leading = std::all_of(top.begin(), top.end(), [](auto p) { return p <= 5; });
  if (!leading) std::cerr << "note: top-3 positions by gain are not all within the first five\n";

  auto report = ordered_json::parse(fi.to_json());
  report["top_positions_by_gain"] = top;
  report["top3_within_first5"] = leading;
  report["input"] = cfg.paths.eval_wdr_path().string();
  std::string tops;
  for (const auto p : top) tops += (tops.empty() ? "" : ", ") + std::to_string(p);
  return finish(cfg, "explain", "explain: top positions by gain [" + tops + "] over " + std::to_string(rows.size()) +
                                    " samples",
                std::move(report));
}

CommandOutcome run_command(std::string_view name, const PipelineConfig& cfg) {
  if (name == "train-classifier") return cmd_train_classifier(cfg);
  if (name == "attack") return cmd_attack(cfg);
  if (name == "wdr") return cmd_wdr(cfg);
  if (name == "train-detector") return cmd_train_detector(cfg);
  if (name == "evaluate") return cmd_evaluate(cfg);
  if (name == "sweep") return cmd_sweep(cfg);
  if (name == "transfer") return cmd_transfer(cfg);
  if (name == "explain") return cmd_explain(cfg);
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingArtifactError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const FormatError*>(&e) != nullptr) return 4;
  if (dynamic_cast<const ProviderError*>(&e) != nullptr) return 5;
  if (dynamic_cast<const InvalidArgument*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace wdr
