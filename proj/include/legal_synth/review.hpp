#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "legal_synth/gateway.hpp"
#include "legal_synth/promptkit.hpp"
#include "legal_synth/qa_pair.hpp"
#include "legal_synth/synthesis.hpp"

namespace legal_synth {

struct ReviewVerdict {
  std::string qa_id;
  Verdict verdict = Verdict::No;
  std::string reason;
  std::string reviewer_model;

  bool operator==(const ReviewVerdict&) const = default;
};

nlohmann::json to_json(const ReviewVerdict& v);
ReviewVerdict review_verdict_from_json(const nlohmann::json& j);

struct ReviewOutcome {
  std::vector<ReviewVerdict> verdicts;
  std::vector<FailureRecord> failures;  // batches whose call or parse failed
  std::vector<std::string> warnings;
  std::size_t batches = 0;
};

// One reviewer call for at most kMaxReviewBatch pairs from the same source.
// A failed call or unparseable reply turns every pair into No.
ReviewOutcome review_batch(std::string_view section_text, std::span<const QAPair> candidates, Gateway& gateway,
                           const TemplateSet& templates = TemplateSet::builtin());

// Reviews every graded pair still in Candidate status, batched per source in
// generation order. The reviewer sees only the sections the pair was
// generated from.
ReviewOutcome review_candidates(std::span<const QAPair> candidates, std::span<const ProvisionRecord> corpus,
                                Gateway& gateway, const TemplateSet& templates = TemplateSet::builtin());

// Standard-strategy pairs skip review: Candidate -> Retained.
void accept_unreviewed(std::vector<QAPair>& pairs, Strategy strategy = Strategy::Standard);

// Yes -> Retained, No -> Rejected. Candidates left without a verdict are
// Rejected. Throws UnknownQaId. Question and answer bytes are never touched.
void apply_verdicts(std::vector<QAPair>& candidates, std::span<const ReviewVerdict> verdicts);

struct DedupConfig {
  double threshold = 0.85;
  std::size_t shingle_size = 3;
  bool include_standard = false;
};

struct DuplicateRecord {
  std::string qa_id;
  std::string survivor_id;  // an earlier matching qa_id in the group
  bool exact = false;
  double jaccard = 0.0;
};

nlohmann::json to_json(const DuplicateRecord& d);

// Sorted, unique k-token shingles of the case-folded, punctuation-free text.
// Shorter texts yield their whole token sequence as one shingle.
std::vector<std::string> shingles(std::string_view text, std::size_t k = 3);

// Two empty sets count as identical (1.0).
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

// Within each (strategy, source_refs) group of Retained pairs, a pair becomes
// Duplicate when it matches any pair with a smaller qa_id: same normalized
// question and answer, or question-shingle Jaccard >= threshold.
std::vector<DuplicateRecord> deduplicate(std::vector<QAPair>& pairs, const DedupConfig& config = {});

struct RetentionRow {
  Strategy strategy = Strategy::Standard;
  Level level = Level::None;
  std::size_t candidates_before = 0;
  std::size_t rejected_by_review = 0;
  std::size_t duplicates = 0;
  std::size_t retained_after = 0;

  std::size_t after_review() const { return candidates_before - rejected_by_review; }
};

struct RetentionStats {
  // standard, L1, L2, L3, L4
  std::vector<RetentionRow> rows;

  const RetentionRow& row(Strategy s, Level l) const;
  RetentionRow graded_total() const;
  RetentionRow total() const;
};

RetentionStats compute_retention(std::span<const QAPair> pairs);

nlohmann::json to_json(const RetentionStats& s);
RetentionStats retention_from_json(const nlohmann::json& j);

// Before/after table grouped by strategy with one row per level.
std::string render_retention_table(const RetentionStats& s);

struct Partition {
  std::vector<const QAPair*> candidate;
  std::vector<const QAPair*> retained;
  std::vector<const QAPair*> rejected;
  std::vector<const QAPair*> duplicate;
};

Partition partition(std::span<const QAPair> pairs);

}  // namespace legal_synth
