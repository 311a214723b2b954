#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "legal_synth/gateway.hpp"
#include "legal_synth/promptkit.hpp"
#include "legal_synth/run_config.hpp"

namespace legal_synth {

enum class Stage { Ingest, Synth, Review, Split, Export, BuildEval, Score, Report };

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);
const std::array<Stage, 8>& all_stages();

struct PipelineOptions {
  // Live mode only. Defaults to the httplib transport and the system clock.
  HttpTransport* transport = nullptr;
  Clock* clock = nullptr;
  // Defaults to the LEGAL_SYNTH_API_KEY environment variable.
  std::optional<std::string> api_key;
  std::ostream* log = nullptr;
  // Re-run stages even when their inputs are unchanged.
  bool force = false;
};

struct StageResult {
  Stage stage = Stage::Ingest;
  bool skipped = false;
  std::vector<std::string> outputs;  // relative to the output directory
  std::vector<std::string> warnings;
  std::string summary;
};

// File-based stages under config.out. Each stage checks its predecessor's
// artifacts (MissingArtifact), records an input hash in stages/<name>.json
// and refreshes manifest.json.
class Pipeline {
 public:
  // Validates the config (ConfigError).
  explicit Pipeline(RunConfig config, PipelineOptions options = {});
  ~Pipeline();

  StageResult run(Stage stage);
  std::vector<StageResult> run_all();

  const RunConfig& config() const { return config_; }
  const TemplateSet& templates() const { return templates_; }
  std::filesystem::path out() const { return config_.out; }

 private:
  class Backends;

  StageResult ingest();
  StageResult synth();
  StageResult review();
  StageResult split();
  StageResult export_stage();
  StageResult build_eval();
  StageResult score();
  StageResult report();

  void require(const std::filesystem::path& rel, Stage producer) const;
  std::string input_hash(Stage stage, const std::vector<std::string>& inputs, const nlohmann::json& params) const;
  bool up_to_date(Stage stage, const std::string& hash) const;
  void record_stage(Stage stage, const std::string& hash, const std::vector<std::string>& outputs) const;
  void refresh_manifest() const;
  Backends& backends();
  void log(const std::string& line) const;

  RunConfig config_;
  PipelineOptions options_;
  TemplateSet templates_;
  std::unique_ptr<Backends> backends_;
};

// Process exit code for an error class: 2 missing artifact, 3 config,
// 4 backend, 5 data, 1 anything else.
int exit_code_for(ErrorKind kind);

// Stable file name for a model id ("org/model" -> "org_model").
std::string model_file_stem(std::string_view model_name);

}  // namespace legal_synth
