#ifndef WDR_PIPELINE_HPP
#define WDR_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wdr/attacks.hpp"
#include "wdr/classifier.hpp"
#include "wdr/detector.hpp"
#include "wdr/eval.hpp"
#include "wdr/reaction.hpp"
#include "wdr/remote.hpp"

namespace wdr {

/// Raised when a command needs a file an earlier command produces.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::filesystem::path& path, std::string producer)
      : Error("missing " + path.string() + "; run `wdr " + producer + "` first"), path_(path),
        producer_(std::move(producer)) {}

  const std::filesystem::path& path() const { return path_; }
  const std::string& producer() const { return producer_; }

 private:
  std::filesystem::path path_;
  std::string producer_;
};

/// Bad configuration document or override.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct PipelinePaths {
  std::filesystem::path train_corpus;   // labeled texts for the target classifier
  std::filesystem::path attack_corpus;  // originals to attack
  std::filesystem::path lexicon;
  std::filesystem::path out_dir = "runs/default";
  // Outputs; empty means "<out_dir>/<default name>".
  std::filesystem::path classifier;
  std::filesystem::path attacked;
  std::filesystem::path wdr;
  std::filesystem::path detector;
  std::filesystem::path heldout;
  std::filesystem::path eval_wdr;  // evaluate/sweep/explain input; defaults to heldout

  std::filesystem::path classifier_path() const;
  std::filesystem::path attacked_path() const;
  std::filesystem::path wdr_path() const;
  std::filesystem::path detector_path() const;
  std::filesystem::path heldout_path() const;
  std::filesystem::path eval_wdr_path() const;
  std::filesystem::path report_path(std::string_view command) const;
};

struct ProviderConfig {
  std::string kind = "builtin";  // "builtin" | "remote"
  RemoteOptions remote;
};

struct PipelineConfig {
  std::uint64_t seed = 13;
  int num_classes = 2;
  PipelinePaths paths;
  ProviderConfig provider;
  ClassifierTrainConfig classifier;
  AttackKind attack_kind = AttackKind::pwws;
  AttackConfig attack;
  std::size_t attack_threads = 1;
  BatchWdrOptions wdr;
  GbtConfig detector;
  Real test_fraction = 0.3;
  Real threshold = 0.5;
  std::vector<Real> sweep_thresholds = kDefaultThresholdGrid;
  TransferConfig transfer;
  std::size_t explain_repeats = 5;

  /// Strict: unknown keys are rejected. The top-level seed is copied into
  /// every stochastic stage.
  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

/// Built-in defaults as a JSON document (the shape --config files follow).
nlohmann::ordered_json default_config_json();

/// Sets the field at a dotted path ("detector.num_trees") to `value`,
/// parsed as JSON when possible and as a plain string otherwise.
void apply_override(nlohmann::json& config, std::string_view dotted, std::string_view value);

/// Reads a config file over the defaults.
nlohmann::json load_config_json(const std::filesystem::path& path);

struct CommandOutcome {
  std::string summary;
  nlohmann::ordered_json report;
  std::filesystem::path report_path;
};

std::unique_ptr<LogitsProvider> make_provider(const PipelineConfig& cfg);

CommandOutcome cmd_train_classifier(const PipelineConfig& cfg);
CommandOutcome cmd_attack(const PipelineConfig& cfg);
CommandOutcome cmd_wdr(const PipelineConfig& cfg);
CommandOutcome cmd_train_detector(const PipelineConfig& cfg);
CommandOutcome cmd_evaluate(const PipelineConfig& cfg);
CommandOutcome cmd_sweep(const PipelineConfig& cfg);
CommandOutcome cmd_transfer(const PipelineConfig& cfg);
CommandOutcome cmd_explain(const PipelineConfig& cfg);

inline const std::vector<std::string> kCommands{"train-classifier", "attack",   "wdr",      "train-detector",
                                                "evaluate",         "sweep",    "transfer", "explain"};

CommandOutcome run_command(std::string_view name, const PipelineConfig& cfg);

/// Exit codes: 2 configuration/usage, 3 missing upstream artifact,
/// 4 malformed input file, 5 target model failure, 1 anything else.
int exit_code_for(const std::exception& e);

/// Stratified split with a fixed seed: the same fraction of each origin
/// goes to the test side.
void stratified_split(std::span<const LabeledWdr> rows, Real test_fraction, std::uint64_t seed,
                      std::vector<LabeledWdr>& train, std::vector<LabeledWdr>& test);

/// 64-bit FNV-1a of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace wdr

#endif  // WDR_PIPELINE_HPP
