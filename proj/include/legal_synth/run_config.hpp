#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "legal_synth/corpus.hpp"
#include "legal_synth/eval_builder.hpp"
#include "legal_synth/gateway.hpp"
#include "legal_synth/review.hpp"
#include "legal_synth/splitter.hpp"
#include "legal_synth/synthesis.hpp"

namespace legal_synth {

enum class StrategyChoice { Standard, Graded, Both };

std::string_view to_string(StrategyChoice s);

struct CorpusSource {
  std::filesystem::path path;
  ProvisionFormat format = ProvisionFormat::Jsonl;
  std::string law;  // required for raw text
};

struct RunConfig {
  std::vector<CorpusSource> corpus;
  std::vector<std::filesystem::path> passages;
  std::vector<std::string> laws = LawRegistry::defaults().codes();

  StrategyChoice strategy = StrategyChoice::Both;
  std::array<bool, 4> levels = {true, true, true, true};
  int standard_cap = kDefaultStandardCap;
  int l4_group_size = 3;
  int l4_groups_per_law = 0;
  bool l4_cross_law = false;

  double dedup_threshold = 0.85;
  std::size_t shingle_size = 3;

  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;  // defaults to seed
  double test_ratio = kDefaultTestRatio;

  std::vector<EvalSetSpec> eval_sets = default_eval_sets();

  BackendConfig generator;
  BackendConfig reviewer;
  BackendConfig judge;
  // The first candidate is the baseline of the delta table.
  std::vector<BackendConfig> candidates;

  std::optional<std::filesystem::path> replay;
  std::optional<std::filesystem::path> record;
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> templates_dir;

  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  LawRegistry registry() const { return LawRegistry(laws); }
  SynthesisConfig synthesis_config(const TemplateSet& templates) const;
  DedupConfig dedup_config() const;

  // Throws ConfigError.
  void validate() const;
};

// Relative paths are resolved against base_dir. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Paths are written as given (absolute after loading).
nlohmann::json to_json(const RunConfig& c);

}  // namespace legal_synth
