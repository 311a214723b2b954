#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "legal_synth/corpus.hpp"
#include "legal_synth/gateway.hpp"
#include "legal_synth/promptkit.hpp"
#include "legal_synth/splitter.hpp"
#include "legal_synth/synthesis.hpp"

namespace legal_synth {

enum class EvalKind { Open, Mcq };

std::string_view to_string(EvalKind k);

inline constexpr std::size_t kMcqOptions = 4;

struct EvalItem {
  std::string item_id;
  EvalKind kind = EvalKind::Open;
  std::optional<std::string> context;  // passage shown to the candidate
  std::string question;
  std::string reference_answer;      // open
  std::vector<std::string> options;  // mcq, exactly four
  int gold_index = -1;               // mcq
  std::vector<UnitKey> source_refs;

  bool operator==(const EvalItem&) const = default;
};

nlohmann::json to_json(const EvalItem& item);
EvalItem eval_item_from_json(const nlohmann::json& j);

struct EvalSource {
  UnitKey key;
  std::string prompt_text;             // what the generator sees
  std::optional<std::string> context;  // passages only
};

EvalSource eval_source(const ProvisionRecord& p);
EvalSource eval_source(const PassageRecord& p);

struct EvalSetSpec {
  std::string name;
  EvalKind kind = EvalKind::Open;
  UnitKind source_kind = UnitKind::Statute;
  std::optional<std::string> law_filter;
  std::size_t target_n = 0;
};

// LegalMC4 QA (732), BGB QA (715), LegalMC4 MCQ (1315), BGB MCQ (1845).
const std::vector<EvalSetSpec>& default_eval_sets();

// Test-split sources of the set's kind, in seeded hash order, capped at
// target_n.
std::vector<EvalSource> select_eval_sources(const EvalSetSpec& spec, std::span<const ProvisionRecord> provisions,
                                            std::span<const PassageRecord> passages, const SplitIndex& splits,
                                            std::uint64_t seed);

struct EvalBuild {
  std::vector<EvalItem> items;
  std::vector<FailureRecord> dropped;
};

// Throws ContaminationError if any source is not test-split.
EvalBuild build_open_set(std::string_view set_name, std::span<const EvalSource> sources, Gateway& gateway,
                         const SplitIndex& splits, const TemplateSet& templates = TemplateSet::builtin());

// Gold position is a seeded permutation keyed by item id. Items with
// duplicate or empty options are dropped as DegenerateItem.
EvalBuild build_mcq_set(std::string_view set_name, std::span<const EvalSource> sources, Gateway& gateway,
                        const SplitIndex& splits, std::uint64_t seed,
                        const TemplateSet& templates = TemplateSet::builtin());

// Places `correct` followed by the distractors into a seeded order; returns
// the options and the gold position.
std::pair<std::vector<std::string>, int> shuffle_options(const std::string& correct,
                                                         const std::vector<std::string>& distractors,
                                                         std::string_view item_id, std::uint64_t seed);

}  // namespace legal_synth
