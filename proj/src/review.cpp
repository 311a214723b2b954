#include "legal_synth/review.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "legal_synth/text.hpp"

namespace legal_synth {

nlohmann::json to_json(const ReviewVerdict& v) {
  return {{"qa_id", v.qa_id}, {"verdict", to_string(v.verdict)}, {"reason", v.reason},
          {"reviewer_model", v.reviewer_model}};
}

ReviewVerdict review_verdict_from_json(const nlohmann::json& j) {
  try {
    const auto verdict = j.at("verdict").get<std::string>();
    if (verdict != "Yes" && verdict != "No") fail(ErrorKind::Schema, "verdict must be Yes or No");
    return ReviewVerdict{j.at("qa_id").get<std::string>(), verdict == "Yes" ? Verdict::Yes : Verdict::No,
                         j.at("reason").get<std::string>(), j.value("reviewer_model", std::string())};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad review verdict: ") + e.what());
  }
}

namespace {

std::string refs_key(const QAPair& p) {
  std::string key(to_string(p.strategy));
  for (const auto& r : p.source_refs) key.append("|").append(r.canonical());
  return key;
}

struct PreparedBatch {
  std::vector<const QAPair*> members;
  std::string prompt;
  std::string key;
};

void collect_batch(const PreparedBatch& batch, const std::optional<std::string>& reply, ErrorKind error_kind,
                   const std::string& error, const std::string& model, ReviewOutcome& out) {
  ++out.batches;
  std::vector<int> ids;
  for (std::size_t i = 0; i < batch.members.size(); ++i) ids.push_back(static_cast<int>(i + 1));
  if (!reply) {
    out.failures.push_back({batch.key, std::string(to_string(error_kind)), error});
    for (const auto* m : batch.members) {
      out.verdicts.push_back({m->qa_id, Verdict::No, "review call failed: " + std::string(to_string(error_kind)), model});
    }
    return;
  }
  const auto parsed = parse_review_output(*reply, ids);
  if (parsed.parse_failed) {
    out.failures.push_back({batch.key, std::string(to_string(ErrorKind::ParseFailure)),
                            "reviewer response could not be parsed"});
  }
  for (const auto& w : parsed.warnings) out.warnings.push_back(batch.key + ": " + w);
  for (const auto& v : parsed.verdicts) {
    out.verdicts.push_back({batch.members[static_cast<std::size_t>(v.local_id - 1)]->qa_id, v.verdict, v.reason, model});
  }
}

ReviewOutcome run_batches(const std::vector<PreparedBatch>& batches, Gateway& gateway) {
  std::vector<std::vector<Message>> requests;
  requests.reserve(batches.size());
  for (const auto& b : batches) requests.push_back(user_prompt(b.prompt));
  const auto outcomes = gateway.complete_all(requests);
  ReviewOutcome out;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    collect_batch(batches[i], outcomes[i].text, outcomes[i].error_kind, outcomes[i].error,
                  gateway.config().model_name, out);
  }
  return out;
}

}  // namespace

ReviewOutcome review_batch(std::string_view section_text, std::span<const QAPair> candidates, Gateway& gateway,
                           const TemplateSet& templates) {
  PreparedBatch batch;
  batch.prompt = render_review_prompt(section_text, candidates, templates);
  for (const auto& c : candidates) batch.members.push_back(&c);
  batch.key = candidates.empty() ? "review" : "review/" + refs_key(candidates.front());
  return run_batches({batch}, gateway);
}

ReviewOutcome review_candidates(std::span<const QAPair> candidates, std::span<const ProvisionRecord> corpus,
                                Gateway& gateway, const TemplateSet& templates) {
  std::map<UnitKey, const ProvisionRecord*> by_key;
  for (const auto& p : corpus) by_key.emplace(unit_key(p), &p);

  std::vector<std::string> order;
  std::map<std::string, std::vector<const QAPair*>> groups;
  for (const auto& c : candidates) {
    if (c.strategy != Strategy::Graded || c.status != QAStatus::Candidate) continue;
    const auto key = refs_key(c);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&c);
  }

  std::vector<PreparedBatch> batches;
  for (const auto& key : order) {
    const auto& members = groups[key];
    std::vector<ProvisionRecord> sources;
    for (const auto& ref : members.front()->source_refs) {
      const auto it = by_key.find(ref);
      if (it == by_key.end()) fail(ErrorKind::Schema, "candidate source " + ref.display() + " is not in the corpus");
      sources.push_back(*it->second);
    }
    const auto section_text = render_section_block(sources);
    for (std::size_t start = 0; start < members.size(); start += kMaxReviewBatch) {
      const auto end = std::min(members.size(), start + kMaxReviewBatch);
      PreparedBatch batch;
      batch.members.assign(members.begin() + static_cast<std::ptrdiff_t>(start),
                           members.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<QAPair> copies;
      for (const auto* m : batch.members) copies.push_back(*m);
      batch.prompt = render_review_prompt(section_text, copies, templates);
      batch.key = "review/" + key + "#" + std::to_string(start / kMaxReviewBatch);
      batches.push_back(std::move(batch));
    }
  }
  return run_batches(batches, gateway);
}

void accept_unreviewed(std::vector<QAPair>& pairs, Strategy strategy) {
  for (auto& p : pairs) {
    if (p.strategy == strategy && p.status == QAStatus::Candidate) transition(p, QAStatus::Retained);
  }
}

void apply_verdicts(std::vector<QAPair>& candidates, std::span<const ReviewVerdict> verdicts) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < candidates.size(); ++i) index.emplace(candidates[i].qa_id, i);
  std::map<std::size_t, Verdict> decided;
  for (const auto& v : verdicts) {
    const auto it = index.find(v.qa_id);
    if (it == index.end()) fail(ErrorKind::UnknownQaId, "verdict for unknown qa_id " + v.qa_id);
    auto [d, inserted] = decided.emplace(it->second, v.verdict);
    if (!inserted && v.verdict == Verdict::No) d->second = Verdict::No;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    if (c.status != QAStatus::Candidate) continue;
    const auto d = decided.find(i);
    transition(c, d != decided.end() && d->second == Verdict::Yes ? QAStatus::Retained : QAStatus::Rejected);
  }
}

nlohmann::json to_json(const DuplicateRecord& d) {
  return {{"qa_id", d.qa_id}, {"survivor_id", d.survivor_id}, {"exact", d.exact}, {"jaccard", d.jaccard}};
}

std::vector<std::string> shingles(std::string_view text, std::size_t k) {
  const auto tokens = fold_tokens(text);
  std::vector<std::string> out;
  if (tokens.empty()) return out;
  auto join = [&](std::size_t from, std::size_t n) {
    std::string s;
    for (std::size_t i = from; i < from + n; ++i) {
      if (i > from) s.push_back(' ');
      s.append(tokens[i]);
    }
    return s;
  };
  if (k == 0 || tokens.size() < k) {
    out.push_back(join(0, tokens.size()));
  } else {
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) out.push_back(join(i, k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::size_t intersection_size(std::span<const std::string> a, std::span<const std::string> b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

std::string exact_key(const QAPair& p) {
  std::string key;
  for (const auto& t : fold_tokens(p.question)) key.append(t).push_back(' ');
  key.push_back('\x1f');
  for (const auto& t : fold_tokens(p.answer)) key.append(t).push_back(' ');
  return key;
}

}  // namespace

double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() && b.empty()) return 1.0;
  const auto inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::vector<DuplicateRecord> deduplicate(std::vector<QAPair>& pairs, const DedupConfig& config) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.status != QAStatus::Retained) continue;
    if (p.strategy == Strategy::Standard && !config.include_standard) continue;
    groups[refs_key(p)].push_back(i);
  }

  std::vector<DuplicateRecord> records;
  std::vector<std::size_t> losers;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return pairs[a].qa_id < pairs[b].qa_id; });
    std::vector<std::vector<std::string>> sh(members.size());
    std::vector<std::string> exact(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
      sh[m] = shingles(pairs[members[m]].question, config.shingle_size);
      exact[m] = exact_key(pairs[members[m]]);
    }
    // Inverted index over earlier members; empty shingle sets only match
    // each other.
    std::map<std::string, std::vector<std::size_t>, std::less<>> postings;
    std::map<std::string, std::size_t> first_exact;
    std::vector<std::size_t> empties;
    for (std::size_t m = 0; m < members.size(); ++m) {
      std::optional<DuplicateRecord> hit;
      if (auto e = first_exact.find(exact[m]); e != first_exact.end()) {
        hit = DuplicateRecord{pairs[members[m]].qa_id, pairs[members[e->second]].qa_id, true, 1.0};
      } else {
        std::set<std::size_t> seen;
        std::vector<std::size_t> cands;
        if (sh[m].empty()) {
          cands = empties;
        } else {
          for (const auto& s : sh[m]) {
            if (auto it = postings.find(s); it != postings.end()) {
              for (auto c : it->second) {
                if (seen.insert(c).second) cands.push_back(c);
              }
            }
          }
        }
        std::sort(cands.begin(), cands.end());
        for (auto c : cands) {
          const double jac = jaccard(sh[m], sh[c]);
          if (jac >= config.threshold) {
            hit = DuplicateRecord{pairs[members[m]].qa_id, pairs[members[c]].qa_id, false, jac};
            break;
          }
        }
      }
      first_exact.try_emplace(exact[m], m);
      if (sh[m].empty()) empties.push_back(m);
      for (const auto& s : sh[m]) postings[s].push_back(m);
      if (hit) {
        records.push_back(std::move(*hit));
        losers.push_back(members[m]);
      }
    }
  }
  for (auto i : losers) transition(pairs[i], QAStatus::Duplicate);
  std::sort(records.begin(), records.end(),
            [](const DuplicateRecord& a, const DuplicateRecord& b) { return a.qa_id < b.qa_id; });
  return records;
}

namespace {

constexpr std::pair<Strategy, Level> kRows[] = {{Strategy::Standard, Level::None},
                                                {Strategy::Graded, Level::L1},
                                                {Strategy::Graded, Level::L2},
                                                {Strategy::Graded, Level::L3},
                                                {Strategy::Graded, Level::L4}};

RetentionRow sum_rows(std::span<const RetentionRow> rows, Strategy s, bool only_strategy) {
  RetentionRow total{s, Level::None, 0, 0, 0, 0};
  for (const auto& r : rows) {
    if (only_strategy && r.strategy != s) continue;
    total.candidates_before += r.candidates_before;
    total.rejected_by_review += r.rejected_by_review;
    total.duplicates += r.duplicates;
    total.retained_after += r.retained_after;
  }
  return total;
}

}  // namespace

const RetentionRow& RetentionStats::row(Strategy s, Level l) const {
  for (const auto& r : rows) {
    if (r.strategy == s && r.level == l) return r;
  }
  fail(ErrorKind::Schema, "no retention row for " + std::string(to_string(s)) + "/" + std::string(to_string(l)));
}

RetentionRow RetentionStats::graded_total() const { return sum_rows(rows, Strategy::Graded, true); }
RetentionRow RetentionStats::total() const { return sum_rows(rows, Strategy::Graded, false); }

RetentionStats compute_retention(std::span<const QAPair> pairs) {
  RetentionStats stats;
  for (const auto& [s, l] : kRows) stats.rows.push_back({s, l, 0, 0, 0, 0});
  for (const auto& p : pairs) {
    auto it = std::find_if(stats.rows.begin(), stats.rows.end(),
                           [&](const RetentionRow& r) { return r.strategy == p.strategy && r.level == p.level; });
    if (it == stats.rows.end()) continue;
    ++it->candidates_before;
    switch (p.status) {
      case QAStatus::Rejected: ++it->rejected_by_review; break;
      case QAStatus::Duplicate: ++it->duplicates; break;
      case QAStatus::Retained: ++it->retained_after; break;
      case QAStatus::Candidate: break;
    }
  }
  return stats;
}

nlohmann::json to_json(const RetentionStats& s) {
  auto row_json = [](const RetentionRow& r) {
    return nlohmann::json{{"strategy", to_string(r.strategy)},
                          {"level", to_string(r.level)},
                          {"candidates_before", r.candidates_before},
                          {"rejected_by_review", r.rejected_by_review},
                          {"after_review", r.after_review()},
                          {"duplicates", r.duplicates},
                          {"retained_after", r.retained_after}};
  };
  auto rows = nlohmann::json::array();
  for (const auto& r : s.rows) rows.push_back(row_json(r));
  return {{"rows", rows},
          {"totals", {{"standard", row_json(s.row(Strategy::Standard, Level::None))},
                      {"graded", row_json(s.graded_total())}}}};
}

RetentionStats retention_from_json(const nlohmann::json& j) {
  RetentionStats s;
  try {
    for (const auto& r : j.at("rows")) {
      s.rows.push_back({strategy_from_string(r.at("strategy").get<std::string>()),
                        level_from_string(r.at("level").get<std::string>()), r.at("candidates_before").get<std::size_t>(),
                        r.at("rejected_by_review").get<std::size_t>(), r.at("duplicates").get<std::size_t>(),
                        r.at("retained_after").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad retention stats: ") + e.what());
  }
  return s;
}

std::string render_retention_table(const RetentionStats& s) {
  constexpr int kLabel = 34;
  constexpr int kCol = 18;
  std::ostringstream os;
  auto line = [&](std::string_view label, const std::vector<std::string>& cells) {
    os << std::left << std::setw(kLabel) << label;
    for (const auto& c : cells) os << std::right << std::setw(kCol) << c;
    os << '\n';
  };
  auto counts = [](const RetentionRow& r) {
    return std::vector<std::string>{std::to_string(r.candidates_before), std::to_string(r.rejected_by_review),
                                    std::to_string(r.duplicates), std::to_string(r.retained_after)};
  };
  const std::string rule(kLabel + 4 * kCol, '-');
  line("Dataset", {"Before Filtering", "Review Rejected", "Duplicates", "After Filtering"});
  os << rule << '\n';
  os << "Standard generation\n";
  line("Total QA pairs", counts(s.row(Strategy::Standard, Level::None)));
  os << rule << '\n';
  os << "Difficulty-graded generation\n";
  line("Level 1 (Basic)", counts(s.row(Strategy::Graded, Level::L1)));
  line("Level 2 (Intermediate)", counts(s.row(Strategy::Graded, Level::L2)));
  line("Level 3 (Advanced)", counts(s.row(Strategy::Graded, Level::L3)));
  line("Level 4 (Expert)", counts(s.row(Strategy::Graded, Level::L4)));
  os << rule << '\n';
  line("Difficulty-graded generation", counts(s.graded_total()));
  return os.str();
}

Partition partition(std::span<const QAPair> pairs) {
  Partition p;
  for (const auto& q : pairs) {
    switch (q.status) {
      case QAStatus::Candidate: p.candidate.push_back(&q); break;
      case QAStatus::Retained: p.retained.push_back(&q); break;
      case QAStatus::Rejected: p.rejected.push_back(&q); break;
      case QAStatus::Duplicate: p.duplicate.push_back(&q); break;
    }
  }
  return p;
}

}  // namespace legal_synth
