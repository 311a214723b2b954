#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "legal_synth/eval_builder.hpp"
#include "legal_synth/gateway.hpp"
#include "legal_synth/promptkit.hpp"

namespace legal_synth {

struct ModelAnswer {
  std::string item_id;
  std::string raw_text;
  std::optional<int> option;       // mcq: 0..3
  std::optional<std::string> text; // open
  std::string error;               // gateway failure, if any

  bool extractable() const { return option.has_value() || text.has_value(); }
};

nlohmann::json to_json(const ModelAnswer& a);
ModelAnswer model_answer_from_json(const nlohmann::json& j);

// First standalone A-D (any case, optionally parenthesized) in the reply.
std::optional<int> extract_option(std::string_view reply);

std::string render_candidate_prompt(const EvalItem& item, const TemplateSet& templates = TemplateSet::builtin());

// One answer per item in item order; failures become unextractable answers.
std::vector<ModelAnswer> run_candidate(std::span<const EvalItem> items, Gateway& candidate,
                                       const TemplateSet& templates = TemplateSet::builtin());

struct ScoreEntry {
  std::string set_name;
  EvalKind kind = EvalKind::Mcq;
  std::size_t n = 0;
  std::size_t correct = 0;

  // Accuracy in tenths of a percentage point, rounded half up.
  std::int64_t accuracy_tenths() const;
  double accuracy() const { return static_cast<double>(accuracy_tenths()) / 10.0; }
};

// "66.7"
std::string format_tenths(std::int64_t tenths);

// Unextractable counts as incorrect. Throws SetMismatch unless the answers
// cover exactly the items.
ScoreEntry score_mcq(std::string_view set_name, std::span<const ModelAnswer> answers, std::span<const EvalItem> items);

struct JudgedItem {
  std::string item_id;
  bool correct = false;
  std::string rationale;
  bool judge_failed = false;
};

nlohmann::json to_json(const JudgedItem& j);

struct JudgeResult {
  ScoreEntry entry;
  std::vector<JudgedItem> judgments;
};

// Binary judge verdicts; judge failures and unparseable verdicts count as
// incorrect.
JudgeResult judge_open(std::string_view set_name, std::span<const ModelAnswer> answers,
                       std::span<const EvalItem> items, Gateway& judge,
                       const TemplateSet& templates = TemplateSet::builtin());

struct ScoreReport {
  std::string model;
  std::map<std::string, ScoreEntry> sets;
};

nlohmann::json to_json(const ScoreReport& r);
ScoreReport score_report_from_json(const nlohmann::json& j);

struct DeltaRow {
  std::string set_name;
  std::int64_t base_tenths = 0;
  std::int64_t adapted_tenths = 0;

  std::int64_t delta_tenths() const { return adapted_tenths - base_tenths; }
};

// "+12.4", "-7.6", "+0.0"
std::string format_delta(std::int64_t tenths);
// "↑", "↓", "→"
std::string_view delta_arrow(std::int64_t tenths);

struct DeltaTable {
  std::string base_model;
  std::string adapted_model;
  std::vector<DeltaRow> rows;
};

// Throws SetMismatch unless both reports hold the same sets with equal n.
DeltaTable compare(const ScoreReport& base, const ScoreReport& adapted);

nlohmann::json to_json(const DeltaTable& t);

// One row per model, one column per set; adapted rows carry "55.4 ↑12.4".
std::string render_score_table(const ScoreReport& base, std::span<const ScoreReport> adapted);

}  // namespace legal_synth
