#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "legal_synth/corpus.hpp"
#include "legal_synth/json_recovery.hpp"
#include "legal_synth/qa_pair.hpp"

namespace legal_synth {

inline constexpr int kDefaultStandardCap = 5;
inline constexpr std::size_t kMaxReviewBatch = 5;

// Per-level maxima from the graded generation prompts.
int level_cap(Level level, int standard_cap = kDefaultStandardCap);

// Template files compiled in from templates/*.txt, keyed by file stem.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_template_sources();

class TemplateSet {
 public:
  static TemplateSet builtin();
  // Starts from the builtin set; every *.txt in dir overrides by stem.
  static TemplateSet load_dir(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::map<std::string, std::string> hashes() const;
  const std::map<std::string, std::string, std::less<>>& all() const { return templates_; }

  static std::string_view generation_template_name(Strategy strategy, Level level);

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

// Single-pass "{{name}}" substitution. Unknown or unfilled placeholders
// throw ConfigError; substituted text is never rescanned.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& values);

// "BGB § 857\n<text>" blocks separated by a blank line.
std::string render_section_block(std::span<const ProvisionRecord> provisions);

struct GenerationTask {
  Strategy strategy = Strategy::Standard;
  Level level = Level::None;
  std::vector<ProvisionRecord> inputs;
  int cap = 0;
  std::string template_name;
  std::string prompt_text;
  std::string prompt_hash;
};

// Throws ArityError (L4 with fewer than two inputs, anything else with other
// than one) or UnknownLevel (level does not belong to the strategy).
GenerationTask render_generation_prompt(Strategy strategy, Level level,
                                        std::span<const ProvisionRecord> inputs,
                                        const TemplateSet& templates = TemplateSet::builtin(),
                                        int standard_cap = kDefaultStandardCap);

// Pairs are numbered 1..n in the given order. Throws TooManyCandidates above
// kMaxReviewBatch.
std::string render_review_prompt(std::string_view section_text, std::span<const QAPair> candidates,
                                 const TemplateSet& templates = TemplateSet::builtin());

struct QAText {
  std::string question;
  std::string answer;
};

struct RawGenerationOutput {
  std::vector<QAText> qa_pairs;
  std::vector<std::string> warnings;
  RecoveryStep step = RecoveryStep::Whole;
};

// Throws ParseFailure when no {"qa_pairs": [...]} object is recoverable.
// Malformed elements are skipped and pairs beyond cap truncated; both leave
// a warning.
RawGenerationOutput parse_generation_output(std::string_view raw, int cap);

enum class Verdict { Yes, No };

std::string_view to_string(Verdict v);

struct ParsedVerdict {
  int local_id = 0;
  Verdict verdict = Verdict::No;
  std::string reason;
  // True when the verdict is a fail-closed default rather than model output.
  bool defaulted = false;
};

struct ReviewParse {
  std::vector<ParsedVerdict> verdicts;  // one per expected id, same order
  std::vector<std::string> warnings;
  bool parse_failed = false;
};

inline constexpr std::string_view kNoVerdictReason = "no verdict returned";
inline constexpr std::string_view kUnparseableReason = "reviewer response could not be parsed";

// Never throws on model output: unparseable text, unknown ids, malformed or
// conflicting entries all resolve to No.
ReviewParse parse_review_output(std::string_view raw, std::span<const int> expected_ids);

}  // namespace legal_synth
