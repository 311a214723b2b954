#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "legal_synth/corpus.hpp"
#include "legal_synth/gateway.hpp"
#include "legal_synth/promptkit.hpp"
#include "legal_synth/qa_pair.hpp"

namespace legal_synth {

struct SynthesisConfig {
  int standard_cap = kDefaultStandardCap;
  // L1..L4
  std::array<bool, 4> levels = {true, true, true, true};
  int l4_group_size = 3;
  // 0 means as many full groups as each law code allows.
  int l4_groups_per_law = 0;
  bool l4_cross_law = false;
  std::uint64_t seed = 0;
  TemplateSet templates = TemplateSet::builtin();
};

struct FailureRecord {
  std::string task_key;
  std::string error_kind;
  std::string detail;
};

nlohmann::json to_json(const FailureRecord& f);

struct SectionGroup {
  std::vector<UnitKey> members;
};

struct SynthesisResult {
  std::vector<QAPair> candidates;
  std::vector<FailureRecord> failures;
  std::vector<std::string> warnings;
  std::vector<SectionGroup> l4_groups;
  std::size_t tasks = 0;
};

// "graded/L4/BGB:857+1362+1384"
std::string task_key(const GenerationTask& task);

// Same-code groups by seeded sampling without replacement; only full groups
// of l4_group_size are formed. Members are listed in section order.
std::vector<SectionGroup> form_section_groups(std::span<const ProvisionRecord> provisions,
                                              const SynthesisConfig& config);

// One task per provision. Throws AllTasksFailed only when every task failed.
SynthesisResult synthesize_standard(std::span<const ProvisionRecord> provisions, Gateway& gateway,
                                    const SynthesisConfig& config = {});

// L1..L3 per provision in provision order, then one L4 task per group.
SynthesisResult synthesize_graded(std::span<const ProvisionRecord> provisions, Gateway& gateway,
                                  const SynthesisConfig& config = {});

// qa_id = hash(source_refs, level, question). Identical keys get -1, -2, ...
// suffixes ordered by answer text, so the id set does not depend on input
// order.
void assign_qa_ids(std::vector<QAPair>& pairs);

// Umlauts/ß or at least two common German function words.
bool looks_german(std::string_view text);

}  // namespace legal_synth
