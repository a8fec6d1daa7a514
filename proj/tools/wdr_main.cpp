// Command-line front end: one subcommand per pipeline stage.
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wdr/pipeline.hpp"

namespace {

const std::map<std::string, std::string> kHelp{
    {"train-classifier", "train the built-in target classifier"},
    {"attack", "attack the target model and write original/adversarial pairs"},
    {"wdr", "compute WDR feature vectors for the attacked corpus"},
    {"train-detector", "fit the boosted detector and hold out a test split"},
    {"evaluate", "score the frozen detector on a WDR set"},
    {"sweep", "score the frozen detector at several thresholds"},
    {"transfer", "score the frozen detector on other model/dataset/attack sets"},
    {"explain", "rank WDR positions by importance"}};

// Turns leftover "--a.b value" / "--a.b=value" arguments into overrides.
void apply_extras(nlohmann::json& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) throw wdr::ConfigError("unexpected argument '" + arg + "'");
    auto key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw wdr::ConfigError("override --" + key + " has no value");
      value = extras[++i];
    }
    if (key.find('.') == std::string::npos) throw wdr::ConfigError("unknown option --" + key);
    wdr::apply_override(config, key, value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial text detection from word-level differential reactions"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  for (const auto& name : wdr::kCommands) {
    auto* sub = app.add_subcommand(name, kHelp.at(name));
    sub->allow_extras();
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "seed for every stochastic stage");
    sub->add_option("--threshold", threshold, "detector decision threshold");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  try {
    nlohmann::json config = config_path.empty() ? nlohmann::json::object() : wdr::load_config_json(config_path);
    apply_extras(config, sub->remaining());
    if (seed) config["seed"] = *seed;
    if (threshold) config["threshold"] = *threshold;
    const auto cfg = wdr::PipelineConfig::from_json(config);
    const auto outcome = wdr::run_command(sub->get_name(), cfg);
    std::cout << outcome.summary << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "wdr " << sub->get_name() << ": " << e.what() << "\n";
    return wdr::exit_code_for(e);
  }
}
