#include <gtest/gtest.h>

#include <set>

#include "error_of.hpp"
#include "legal_synth/hashing.hpp"
#include "legal_synth/synthesis.hpp"
#include "legal_synth/text.hpp"
#include "scripted_transport.hpp"

using namespace legal_synth;
namespace lt = legal_synth::testing;
using lt::error_of;
using lt::ScriptedTransport;

namespace {

std::vector<ProvisionRecord> provisions(const std::string& law, int n) {
  std::vector<ProvisionRecord> out;
  for (int i = 1; i <= n; ++i) {
    out.push_back({law, std::to_string(i), "Der Inhalt von Paragraph " + std::to_string(i) + " ist geregelt.", {}});
  }
  return out;
}

std::string pairs_json(int n, const std::string& tag = "") {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    arr.push_back({{"question", "Was regelt die Norm " + tag + std::to_string(i) + "?"},
                   {"answer", "Sie regelt den Fall " + std::to_string(i) + "."}});
  }
  return nlohmann::json{{"qa_pairs", arr}}.dump();
}

// Replies with `n` pairs tagged by the prompt hash so every task differs.
ScriptedTransport::Handler n_pairs(int n) {
  return [n](const HttpRequest&, const std::string& prompt, std::size_t) {
    return lt::ok(pairs_json(n, sha256_hex(prompt).substr(0, 6)));
  };
}

}  // namespace

TEST(SynthesizeStandard, FivePairsPerProvision) {
  ScriptedTransport t(n_pairs(5));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto ps = provisions("BGB", 3);
  const auto r = synthesize_standard(ps, gw);
  EXPECT_EQ(r.tasks, 3u);
  ASSERT_EQ(r.candidates.size(), 15u);
  EXPECT_TRUE(r.failures.empty());
  for (const auto& c : r.candidates) {
    EXPECT_EQ(c.strategy, Strategy::Standard);
    EXPECT_EQ(c.level, Level::None);
    EXPECT_EQ(c.status, QAStatus::Candidate);
    EXPECT_EQ(c.source_refs.size(), 1u);
    EXPECT_EQ(c.gen_model, "gpt-4");
    EXPECT_FALSE(c.qa_id.empty());
    EXPECT_FALSE(c.language_flag);
  }
}

TEST(SynthesizeStandard, OverCapIsTruncated) {
  ScriptedTransport t(n_pairs(9));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto ps = provisions("BGB", 2);
  SynthesisConfig c;
  c.standard_cap = 4;
  EXPECT_EQ(synthesize_standard(ps, gw, c).candidates.size(), 8u);
}

TEST(SynthesizeGraded, MalformedOutputIsRecordedNotFatal) {
  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t) {
    if (prompt.find("BGB § 2\n") != std::string::npos && prompt.find("Generate up to 3") != std::string::npos) {
      return lt::ok("Entschuldigung, das kann ich nicht.");
    }
    return lt::ok(pairs_json(2, sha256_hex(prompt).substr(0, 6)));
  });
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto ps = provisions("BGB", 2);
  SynthesisConfig c;
  c.levels = {false, false, true, false};
  const auto r = synthesize_graded(ps, gw, c);
  EXPECT_EQ(r.tasks, 2u);
  EXPECT_EQ(r.candidates.size(), 2u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].task_key, "graded/L3/BGB:2");
  EXPECT_EQ(r.failures[0].error_kind, "ParseFailure");
}

TEST(SynthesizeGraded, SingleProvisionWithinThirteen) {
  ScriptedTransport t(n_pairs(12));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto ps = provisions("BGB", 1);
  const auto r = synthesize_graded(ps, gw);
  // One section cannot form an L4 group.
  EXPECT_TRUE(r.l4_groups.empty());
  EXPECT_EQ(r.candidates.size(), 13u);
  std::map<Level, int> per;
  for (const auto& c : r.candidates) ++per[c.level];
  EXPECT_EQ(per[Level::L1], 5);
  EXPECT_EQ(per[Level::L2], 5);
  EXPECT_EQ(per[Level::L3], 3);
}

TEST(SynthesizeGraded, EmptyL4OutputIsFine) {
  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t) {
    std::size_t sections = 0;
    for (auto pos = prompt.find("BGB \xC2\xA7"); pos != std::string::npos; pos = prompt.find("BGB \xC2\xA7", pos + 1)) {
      ++sections;
    }
    const bool l4 = sections >= 3;
    return lt::ok(l4 ? R"({"qa_pairs": []})" : pairs_json(1, sha256_hex(prompt).substr(0, 6)));
  });
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto ps = provisions("BGB", 3);
  SynthesisConfig c;
  c.levels = {false, false, false, true};
  const auto r = synthesize_graded(ps, gw, c);
  EXPECT_EQ(r.l4_groups.size(), 1u);
  EXPECT_TRUE(r.candidates.empty());
  EXPECT_TRUE(r.failures.empty());
}

TEST(SynthesizeGraded, LevelArityHolds) {
  ScriptedTransport t(n_pairs(3));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock, "gpt-4", 4);
  auto ps = provisions("BGB", 7);
  const auto sgb = provisions("SGB", 4);
  ps.insert(ps.end(), sgb.begin(), sgb.end());
  const auto r = synthesize_graded(ps, gw);
  EXPECT_EQ(r.l4_groups.size(), 3u);  // 2 from BGB, 1 from SGB
  for (const auto& c : r.candidates) {
    if (c.level == Level::L4) {
      EXPECT_EQ(c.source_refs.size(), 3u);
      std::set<std::string> laws;
      for (const auto& k : c.source_refs) laws.insert(k.scope);
      EXPECT_EQ(laws.size(), 1u);
    } else {
      EXPECT_EQ(c.source_refs.size(), 1u);
    }
  }
}

TEST(SynthesizeGraded, AllFailedRaises) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(400)}));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto ps = provisions("BGB", 2);
  EXPECT_EQ(error_of([&] { synthesize_graded(ps, gw); }), ErrorKind::AllTasksFailed);
}

TEST(SectionGroups, FullGroupsOnlyDeterministicAndDisjoint) {
  const auto ps = provisions("BGB", 10);
  SynthesisConfig c;
  c.seed = 5;
  const auto a = form_section_groups(ps, c);
  ASSERT_EQ(a.size(), 3u);
  std::set<UnitKey> seen;
  for (const auto& g : a) {
    ASSERT_EQ(g.members.size(), 3u);
    EXPECT_TRUE(std::is_sorted(g.members.begin(), g.members.end(), unit_key_less));
    for (const auto& m : g.members) EXPECT_TRUE(seen.insert(m).second);
  }
  auto reversed = ps;
  std::reverse(reversed.begin(), reversed.end());
  const auto b = form_section_groups(reversed, c);
  ASSERT_EQ(b.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].members, b[i].members);

  c.l4_groups_per_law = 1;
  EXPECT_EQ(form_section_groups(ps, c).size(), 1u);
  c.l4_groups_per_law = 0;
  c.l4_group_size = 2;
  EXPECT_EQ(form_section_groups(ps, c).size(), 5u);
  c.l4_group_size = 1;
  EXPECT_EQ(error_of([&] { form_section_groups(ps, c); }), ErrorKind::Config);
}

TEST(SectionGroups, CrossLawPoolsAllCodes) {
  auto ps = provisions("BGB", 2);
  const auto gg = provisions("GG", 2);
  ps.insert(ps.end(), gg.begin(), gg.end());
  SynthesisConfig c;
  EXPECT_TRUE(form_section_groups(ps, c).empty());
  c.l4_cross_law = true;
  EXPECT_EQ(form_section_groups(ps, c).size(), 1u);
}

TEST(TaskKey, Format) {
  const std::vector<ProvisionRecord> three = {{"BGB", "857", "a", {}}, {"BGB", "1362", "b", {}}, {"BGB", "1384", "c", {}}};
  EXPECT_EQ(task_key(render_generation_prompt(Strategy::Graded, Level::L4, three)), "graded/L4/BGB:857+1362+1384");
  EXPECT_EQ(task_key(render_generation_prompt(Strategy::Standard, Level::None, std::span(three.data(), 1))),
            "standard/BGB:857");
}

namespace {

QAPair qa(std::string q, std::string a, Level l = Level::L1, std::string sec = "1") {
  QAPair p;
  p.question = std::move(q);
  p.answer = std::move(a);
  p.strategy = Strategy::Graded;
  p.level = l;
  p.source_refs = {UnitKey::statute("BGB", std::move(sec))};
  return p;
}

}  // namespace

TEST(AssignQaIds, CollisionsGetSuffixes) {
  std::vector<QAPair> v = {qa("Frage?", "B"), qa("Frage?", "A"), qa("Frage?", "A", Level::L2)};
  assign_qa_ids(v);
  EXPECT_EQ(v[1].qa_id + "-1", v[0].qa_id);
  EXPECT_NE(v[2].qa_id.substr(0, 16), v[0].qa_id.substr(0, 16));
  EXPECT_EQ(v[2].qa_id.size(), 16u);
}

TEST(AssignQaIds, IndependentOfInputOrder) {
  std::vector<QAPair> v;
  for (int i = 0; i < 30; ++i) v.push_back(qa("Frage " + std::to_string(i % 7) + "?", "Antwort " + std::to_string(i)));
  auto w = v;
  SeededRng rng(1);
  rng.shuffle(w);
  assign_qa_ids(v);
  assign_qa_ids(w);
  std::map<std::string, std::string> a, b;
  for (const auto& p : v) a[p.question + "|" + p.answer] = p.qa_id;
  for (const auto& p : w) b[p.question + "|" + p.answer] = p.qa_id;
  EXPECT_EQ(a, b);
}

TEST(AssignQaIds, ThousandPairsUnique) {
  std::vector<QAPair> v;
  SeededRng rng(9);
  for (int i = 0; i < 1000; ++i) {
    v.push_back(qa("F" + std::to_string(rng.below(50)), "A" + std::to_string(i), Level::L1,
                   std::to_string(1 + rng.below(5))));
  }
  assign_qa_ids(v);
  std::set<std::string> ids;
  for (const auto& p : v) ids.insert(p.qa_id);
  EXPECT_EQ(ids.size(), 1000u);
}

TEST(LooksGerman, Heuristic) {
  EXPECT_TRUE(looks_german("Was gilt für den Erben?"));
  EXPECT_TRUE(looks_german("Wann ist der Vertrag und die Erklärung wirksam"));
  EXPECT_FALSE(looks_german("What happens to possession when someone dies?"));
}
