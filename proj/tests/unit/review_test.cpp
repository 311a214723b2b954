#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "error_of.hpp"
#include "legal_synth/review.hpp"
#include "legal_synth/text.hpp"
#include "scripted_transport.hpp"

using namespace legal_synth;
namespace lt = legal_synth::testing;
using lt::error_of;
using lt::ScriptedTransport;

namespace {

QAPair cand(std::string id, std::string q, std::string a = "Antwort.", Level l = Level::L1,
            std::vector<UnitKey> refs = {UnitKey::statute("BGB", "857")}) {
  QAPair p;
  p.qa_id = std::move(id);
  p.question = std::move(q);
  p.answer = std::move(a);
  p.strategy = Strategy::Graded;
  p.level = l;
  p.source_refs = std::move(refs);
  return p;
}

std::string verdicts_json(const std::vector<std::pair<int, std::string>>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, verdict] : v) arr.push_back({{"qa_id", id}, {"quality_verdict", verdict}, {"reason", "r"}});
  return arr.dump();
}

std::size_t count(std::span<const QAPair> v, QAStatus s) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const QAPair& p) { return p.status == s; }));
}

}  // namespace

TEST(ReviewBatch, MappedVerdicts) {
  ScriptedTransport t(ScriptedTransport::always(
      verdicts_json({{1, "Yes"}, {2, "No"}, {3, "Yes"}, {4, "Yes"}, {5, "No"}})));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  std::vector<QAPair> c;
  for (int i = 0; i < 5; ++i) c.push_back(cand("q" + std::to_string(i), "Frage " + std::to_string(i)));
  const auto out = review_batch("BGB § 857\nDer Besitz geht auf den Erben über.", c, gw);
  ASSERT_EQ(out.verdicts.size(), 5u);
  std::size_t yes = 0;
  for (const auto& v : out.verdicts) yes += v.verdict == Verdict::Yes;
  EXPECT_EQ(yes, 3u);
  EXPECT_EQ(out.verdicts[1].qa_id, "q1");
  EXPECT_EQ(out.verdicts[0].reviewer_model, "gpt-4");
  EXPECT_TRUE(out.failures.empty());
}

TEST(ReviewBatch, OmittedIdFailsClosed) {
  ScriptedTransport t(ScriptedTransport::always(verdicts_json({{1, "Yes"}, {2, "Yes"}, {3, "Yes"}, {5, "Yes"}})));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  std::vector<QAPair> c;
  for (int i = 0; i < 5; ++i) c.push_back(cand("q" + std::to_string(i), "Frage " + std::to_string(i)));
  const auto out = review_batch("x", c, gw);
  EXPECT_EQ(out.verdicts[3].verdict, Verdict::No);
  EXPECT_EQ(out.verdicts[3].reason, kNoVerdictReason);
}

TEST(ReviewBatch, BackendFailureRejectsBatch) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(400)}));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  std::vector<QAPair> c = {cand("a", "F1"), cand("b", "F2")};
  const auto out = review_batch("x", c, gw);
  ASSERT_EQ(out.verdicts.size(), 2u);
  for (const auto& v : out.verdicts) EXPECT_EQ(v.verdict, Verdict::No);
  EXPECT_EQ(out.failures.size(), 1u);
}

TEST(ReviewCandidates, BatchesPerSourceAndShowsOnlyThatSource) {
  std::vector<ProvisionRecord> corpus = {{"BGB", "857", "Der Besitz geht auf den Erben über.", {}},
                                         {"BGB", "90", "Sachen im Sinne des Gesetzes sind nur körperliche Gegenstände.", {}}};
  std::vector<QAPair> c;
  for (int i = 0; i < 7; ++i) c.push_back(cand("a" + std::to_string(i), "Erbe " + std::to_string(i)));
  c.push_back(cand("b0", "Sache?", "Antwort.", Level::L2, {UnitKey::statute("BGB", "90")}));
  // Standard pairs are not reviewed.
  auto std_pair = cand("s0", "Standard?");
  std_pair.strategy = Strategy::Standard;
  std_pair.level = Level::None;
  c.push_back(std_pair);

  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t) {
    std::vector<std::pair<int, std::string>> v;
    for (int i = 1; i <= 5; ++i) v.push_back({i, "Yes"});
    return lt::ok(verdicts_json(v));
  });
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto out = review_candidates(c, corpus, gw);
  EXPECT_EQ(out.batches, 3u);  // 5 + 2 from § 857, 1 from § 90
  EXPECT_EQ(out.verdicts.size(), 8u);
  for (const auto& req : t.requests()) {
    const auto p = lt::prompt_of(req);
    const bool has857 = p.find("Der Besitz geht auf den Erben") != std::string::npos;
    const bool has90 = p.find("körperliche Gegenstände") != std::string::npos;
    EXPECT_NE(has857, has90);
  }
}

TEST(ApplyVerdicts, YesYesNo) {
  std::vector<QAPair> c = {cand("a", "F1"), cand("b", "F2"), cand("c", "F3")};
  const auto before = c;
  const std::vector<ReviewVerdict> v = {{"a", Verdict::Yes, "r", "m"}, {"b", Verdict::Yes, "r", "m"},
                                        {"c", Verdict::No, "r", "m"}};
  apply_verdicts(c, v);
  EXPECT_EQ(count(c, QAStatus::Retained), 2u);
  EXPECT_EQ(count(c, QAStatus::Rejected), 1u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(c[i].question, before[i].question);
    EXPECT_EQ(c[i].answer, before[i].answer);
  }
}

TEST(ApplyVerdicts, EmptyListRejectsAll) {
  std::vector<QAPair> c = {cand("a", "F1"), cand("b", "F2")};
  apply_verdicts(c, {});
  EXPECT_EQ(count(c, QAStatus::Rejected), 2u);
}

TEST(ApplyVerdicts, UnknownId) {
  std::vector<QAPair> c = {cand("a", "F1")};
  const std::vector<ReviewVerdict> v = {{"zz", Verdict::Yes, "r", "m"}};
  EXPECT_EQ(error_of([&] { apply_verdicts(c, v); }), ErrorKind::UnknownQaId);
}

TEST(AcceptUnreviewed, StandardOnly) {
  std::vector<QAPair> c = {cand("a", "F1")};
  auto s = cand("s", "F2");
  s.strategy = Strategy::Standard;
  c.push_back(s);
  accept_unreviewed(c);
  EXPECT_EQ(c[0].status, QAStatus::Candidate);
  EXPECT_EQ(c[1].status, QAStatus::Retained);
}

TEST(Transition, AppendOnly) {
  auto p = cand("a", "F");
  transition(p, QAStatus::Rejected);
  EXPECT_THROW(transition(p, QAStatus::Retained), Error);
  auto r = cand("b", "F");
  transition(r, QAStatus::Retained);
  transition(r, QAStatus::Duplicate);
  EXPECT_THROW(transition(r, QAStatus::Retained), Error);
}

TEST(Shingles, Examples) {
  EXPECT_EQ(shingles("Was passiert mit dem Besitz?"),
            (std::vector<std::string>{"mit dem besitz", "passiert mit dem", "was passiert mit"}));
  EXPECT_EQ(shingles("Kurz?").size(), 1u);
  EXPECT_TRUE(shingles("?!").empty());
  EXPECT_EQ(shingles("Wer ERBT, wer erbt"), shingles("wer erbt wer erbt"));
}

TEST(Jaccard, HandComputed) {
  const auto a = shingles("Was passiert mit dem Besitz?");
  const auto b = shingles("Was passiert mit dem Besitz nach dem Tod?");
  // 3 shared out of 6 distinct shingles.
  EXPECT_EQ(b.size(), 6u);
  EXPECT_DOUBLE_EQ(jaccard(a, b), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(a, a), 1.0);
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(a, {}), 0.0);
}

TEST(Deduplicate, Examples) {
  std::vector<QAPair> v = {cand("b", "Was passiert mit dem Besitz?", "X"), cand("a", "Was passiert mit dem Besitz?", "X"),
                           cand("c", "Was passiert mit dem Besitz nach dem Tod?", "Y")};
  for (auto& p : v) transition(p, QAStatus::Retained);
  const auto d = deduplicate(v);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].qa_id, "b");
  EXPECT_EQ(d[0].survivor_id, "a");
  EXPECT_TRUE(d[0].exact);
  EXPECT_EQ(v[0].status, QAStatus::Duplicate);
  EXPECT_EQ(v[2].status, QAStatus::Retained);
  EXPECT_TRUE(deduplicate(v).empty());
}

TEST(Deduplicate, ScopeIsStrategyAndSources) {
  std::vector<QAPair> v = {cand("a", "Gleiche Frage?"), cand("b", "Gleiche Frage?", "Antwort.", Level::L2),
                           cand("c", "Gleiche Frage?", "Antwort.", Level::L1, {UnitKey::statute("BGB", "90")})};
  for (auto& p : v) transition(p, QAStatus::Retained);
  // Same sources across levels share a group; other sections do not.
  const auto d = deduplicate(v);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].qa_id, "b");
}

TEST(Deduplicate, StandardExcludedByDefault) {
  auto a = cand("a", "Gleich?");
  auto b = cand("b", "Gleich?");
  a.strategy = b.strategy = Strategy::Standard;
  std::vector<QAPair> v = {a, b};
  for (auto& p : v) transition(p, QAStatus::Retained);
  EXPECT_TRUE(deduplicate(v).empty());
  DedupConfig c;
  c.include_standard = true;
  EXPECT_EQ(deduplicate(v, c).size(), 1u);
}

TEST(Deduplicate, RejectedPairsAreIgnored) {
  std::vector<QAPair> v = {cand("a", "Gleich?"), cand("b", "Gleich?")};
  transition(v[0], QAStatus::Rejected);
  transition(v[1], QAStatus::Retained);
  EXPECT_TRUE(deduplicate(v).empty());
}

namespace {

const char* const kWords[] = {"was", "gilt", "wenn", "der", "erbe", "besitz", "die", "sache", "vertrag", "frist"};

std::vector<QAPair> random_set(SeededRng& rng) {
  std::vector<QAPair> v;
  const auto n = 1 + rng.below(8);
  for (std::size_t i = 0; i < n; ++i) {
    std::string q;
    const auto len = 1 + rng.below(6);
    for (std::size_t w = 0; w < len; ++w) q += std::string(w ? " " : "") + kWords[rng.below(4 + i % 3)];
    auto p = cand("id" + std::to_string(rng.below(1000)) + "_" + std::to_string(i), q + "?",
                  "A" + std::to_string(rng.below(2)), Level::L1,
                  {UnitKey::statute("BGB", std::to_string(1 + rng.below(2)))});
    transition(p, QAStatus::Retained);
    v.push_back(std::move(p));
  }
  return v;
}

std::set<std::string> survivors(std::span<const QAPair> v) {
  std::set<std::string> s;
  for (const auto& p : v) {
    if (p.status == QAStatus::Retained) s.insert(p.qa_id);
  }
  return s;
}

}  // namespace

TEST(DeduplicateProperty, IdempotentAndOrderStable) {
  SeededRng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    auto v = random_set(rng);
    auto w = v;
    rng.shuffle(w);
    deduplicate(v);
    deduplicate(w);
    ASSERT_EQ(survivors(v), survivors(w));
    const auto once = v;
    ASSERT_TRUE(deduplicate(v).empty());
    ASSERT_EQ(v, once);
  }
}

TEST(DeduplicateProperty, SmallestIdInEachGroupSurvives) {
  SeededRng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    auto v = random_set(rng);
    std::map<std::string, std::string> smallest;
    for (const auto& p : v) {
      const auto g = p.source_refs[0].canonical();
      if (!smallest.count(g) || p.qa_id < smallest[g]) smallest[g] = p.qa_id;
    }
    deduplicate(v);
    const auto s = survivors(v);
    for (const auto& [g, id] : smallest) ASSERT_TRUE(s.count(id)) << id;
  }
}

TEST(DeduplicateProperty, AddingACandidateKeepsDistinctSurvivors) {
  SeededRng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    auto v = random_set(rng);
    auto base = v;
    deduplicate(base);
    auto extra = random_set(rng);
    auto grown = v;
    grown.push_back(extra[0]);
    deduplicate(grown);
    const auto after = survivors(grown);
    // A survivor that no other pair in the grown set resembles stays.
    for (const auto& p : base) {
      if (p.status != QAStatus::Retained) continue;
      bool resembled = false;
      for (const auto& q : grown) {
        if (q.qa_id == p.qa_id || q.source_refs != p.source_refs) continue;
        resembled |= jaccard(shingles(p.question), shingles(q.question)) >= 0.85 ||
                     (fold_tokens(p.question) == fold_tokens(q.question) && fold_tokens(p.answer) == fold_tokens(q.answer));
      }
      if (!resembled) ASSERT_TRUE(after.count(p.qa_id));
    }
  }
}

TEST(Retention, CountsAndSubtractiveSplit) {
  std::vector<QAPair> v = {cand("a", "F1"), cand("b", "F2"), cand("c", "F3"), cand("d", "F4", "x", Level::L4)};
  transition(v[0], QAStatus::Retained);
  transition(v[1], QAStatus::Rejected);
  transition(v[2], QAStatus::Retained);
  transition(v[2], QAStatus::Duplicate);
  transition(v[3], QAStatus::Retained);
  const auto s = compute_retention(v);
  const auto& l1 = s.row(Strategy::Graded, Level::L1);
  EXPECT_EQ(l1.candidates_before, 3u);
  EXPECT_EQ(l1.rejected_by_review, 1u);
  EXPECT_EQ(l1.duplicates, 1u);
  EXPECT_EQ(l1.retained_after, 1u);
  EXPECT_EQ(l1.after_review(), 2u);
  EXPECT_EQ(s.graded_total().candidates_before, 4u);
  EXPECT_EQ(s.graded_total().retained_after, 2u);
  const auto back = retention_from_json(to_json(s));
  EXPECT_EQ(back.graded_total().retained_after, 2u);
}

TEST(Retention, EmptyInputIsAllZero) {
  const auto s = compute_retention({});
  EXPECT_EQ(s.rows.size(), 5u);
  for (const auto& r : s.rows) {
    EXPECT_EQ(r.candidates_before, 0u);
    EXPECT_EQ(r.retained_after, 0u);
  }
  EXPECT_NE(render_retention_table(s).find("Level 4 (Expert)"), std::string::npos);
}

TEST(Retention, ReferenceTableTotals) {
  RetentionStats s;
  s.rows = {{Strategy::Standard, Level::None, 15734, 0, 0, 15734},
            {Strategy::Graded, Level::L1, 12048, 12048 - 9993, 0, 9993},
            {Strategy::Graded, Level::L2, 12194, 12194 - 8986, 0, 8986},
            {Strategy::Graded, Level::L3, 7094, 7094 - 4485, 0, 4485},
            {Strategy::Graded, Level::L4, 441, 0, 0, 441}};
  EXPECT_EQ(s.graded_total().candidates_before, 31777u);
  EXPECT_EQ(s.graded_total().retained_after, 23905u);
  const auto table = render_retention_table(s);
  EXPECT_NE(table.find("31777"), std::string::npos);
  EXPECT_NE(table.find("23905"), std::string::npos);
  EXPECT_NE(table.find("Total QA pairs"), std::string::npos);
}
