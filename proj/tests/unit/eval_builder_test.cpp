#include <gtest/gtest.h>

#include <array>
#include <set>

#include "error_of.hpp"
#include "legal_synth/eval_builder.hpp"
#include "scripted_transport.hpp"

using namespace legal_synth;
namespace lt = legal_synth::testing;
using lt::error_of;
using lt::ScriptedTransport;

namespace {

SplitIndex all(std::span<const UnitKey> keys, Split s) {
  std::vector<SplitAssignment> a;
  for (const auto& k : keys) a.push_back({k, s, 1, 0.5});
  return SplitIndex(a);
}

std::string mcq_json(const std::string& q, const std::string& correct, std::vector<std::string> distractors) {
  return nlohmann::json{{"question", q}, {"correct_answer", correct}, {"distractors", distractors}}.dump();
}

}  // namespace

TEST(DefaultEvalSets, ReferenceSizes) {
  const auto& s = default_eval_sets();
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].name, "legalmc4_qa");
  EXPECT_EQ(s[0].target_n, 732u);
  EXPECT_EQ(s[1].target_n, 715u);
  EXPECT_EQ(s[2].target_n, 1315u);
  EXPECT_EQ(s[3].target_n, 1845u);
  EXPECT_EQ(s[1].law_filter, "BGB");
  EXPECT_EQ(s[2].kind, EvalKind::Mcq);
  EXPECT_EQ(s[2].source_kind, UnitKind::Passage);
}

// Oracle from Python: itertools.permutations(range(4))[hash % 24].
TEST(ShuffleOptions, Oracle) {
  const auto [opts, gold] = shuffle_options("richtig", {"d1", "d2", "d3"}, "bgb_mcq:statute:BGB:433", 3);
  EXPECT_EQ(gold, 2);
  EXPECT_EQ(opts, (std::vector<std::string>{"d3", "d1", "richtig", "d2"}));
  const auto [opts2, gold2] =
      shuffle_options("richtig", {"d1", "d2", "d3"}, "legalmc4_mcq:passage:mc4-de-001128:0", 20240611);
  EXPECT_EQ(gold2, 1);
  EXPECT_EQ(opts2, (std::vector<std::string>{"d1", "richtig", "d2", "d3"}));
}

TEST(ShuffleOptions, GoldPositionIsBalanced) {
  std::array<int, 4> hist{};
  for (int i = 0; i < 1000; ++i) {
    ++hist[static_cast<std::size_t>(
        shuffle_options("c", {"x", "y", "z"}, "set:statute:BGB:" + std::to_string(i), 3).second)];
  }
  for (int h : hist) {
    EXPECT_GE(h, 200);
    EXPECT_LE(h, 300);
  }
  EXPECT_EQ(error_of([] { shuffle_options("c", {"x", "y"}, "i", 1); }), ErrorKind::DegenerateItem);
}

TEST(SelectEvalSources, TestSplitOnlyFilteredCappedDeterministic) {
  std::vector<ProvisionRecord> ps;
  std::vector<UnitKey> test_keys, train_keys;
  for (int i = 1; i <= 20; ++i) {
    ps.push_back({i % 2 ? "BGB" : "GG", std::to_string(i), "Text " + std::to_string(i), {}});
    (i <= 12 ? test_keys : train_keys).push_back(unit_key(ps.back()));
  }
  std::vector<SplitAssignment> a;
  for (const auto& k : test_keys) a.push_back({k, Split::Test, 1, 0.5});
  for (const auto& k : train_keys) a.push_back({k, Split::Train, 1, 0.5});
  const SplitIndex idx(a);
  EvalSetSpec spec{"bgb_qa", EvalKind::Open, UnitKind::Statute, "BGB", 4};
  const auto s1 = select_eval_sources(spec, ps, {}, idx, 9);
  ASSERT_EQ(s1.size(), 4u);
  for (const auto& s : s1) {
    EXPECT_EQ(s.key.scope, "BGB");
    EXPECT_EQ(idx.at(s.key), Split::Test);
    EXPECT_FALSE(s.context);
    EXPECT_NE(s.prompt_text.find("BGB \xC2\xA7 "), std::string::npos);
  }
  auto reversed = ps;
  std::reverse(reversed.begin(), reversed.end());
  const auto s2 = select_eval_sources(spec, reversed, {}, idx, 9);
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_EQ(s1[i].key, s2[i].key);
  spec.target_n = 100;
  EXPECT_EQ(select_eval_sources(spec, ps, {}, idx, 9).size(), 6u);  // odd sections 1..11
}

TEST(BuildOpenSet, ItemsAndDrops) {
  const std::vector<PassageRecord> passages = {{"d1", 0, "Ein Mietvertrag endet mit Ablauf der Frist.", "t"},
                                               {"d1", 1, "Zweiter Absatz.", "t"}};
  std::vector<EvalSource> sources;
  std::vector<UnitKey> keys;
  for (const auto& p : passages) {
    sources.push_back(eval_source(p));
    keys.push_back(unit_key(p));
  }
  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t) {
    if (prompt.find("Zweiter") != std::string::npos) return lt::ok("keine Frage");
    return lt::ok(R"(```json
{"question": "Wann endet der Vertrag?", "answer": "Mit Ablauf der Frist."}
```)");
  });
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto idx = all(keys, Split::Test);
  const auto b = build_open_set("legalmc4_qa", sources, gw, idx);
  ASSERT_EQ(b.items.size(), 1u);
  EXPECT_EQ(b.items[0].item_id, "legalmc4_qa:passage:d1:0");
  EXPECT_EQ(b.items[0].context, passages[0].text);
  EXPECT_EQ(b.items[0].reference_answer, "Mit Ablauf der Frist.");
  ASSERT_EQ(b.dropped.size(), 1u);
  EXPECT_EQ(b.dropped[0].error_kind, "ParseFailure");
  EXPECT_EQ(eval_item_from_json(to_json(b.items[0])), b.items[0]);
}

TEST(BuildMcqSet, ValidAndDegenerate) {
  const std::vector<ProvisionRecord> ps = {{"BGB", "433", "Durch den Kaufvertrag wird der Verkäufer verpflichtet.", {}},
                                           {"BGB", "90", "Sachen sind körperliche Gegenstände.", {}},
                                           {"BGB", "854", "Der Besitz wird erworben.", {}}};
  std::vector<EvalSource> sources;
  std::vector<UnitKey> keys;
  for (const auto& p : ps) {
    sources.push_back(eval_source(p));
    keys.push_back(unit_key(p));
  }
  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t) {
    if (prompt.find("Sachen sind") != std::string::npos) return lt::ok(mcq_json("Q", "A", {"B", "b", "C"}));
    if (prompt.find("Besitz") != std::string::npos) return lt::ok(mcq_json("Q", "A", {"B", "C"}));
    return lt::ok("Hier: " + mcq_json("Wozu verpflichtet der Kaufvertrag?", "Zur Übergabe der Sache.",
                                      {"Zur Miete.", "Zu nichts.", "Zur Schenkung."}));
  });
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto idx = all(keys, Split::Test);
  const auto b = build_mcq_set("bgb_mcq", sources, gw, idx, 3);
  ASSERT_EQ(b.items.size(), 1u);
  const auto& item = b.items[0];
  EXPECT_EQ(item.item_id, "bgb_mcq:statute:BGB:433");
  EXPECT_EQ(item.options.size(), 4u);
  EXPECT_EQ(item.gold_index, 2);
  EXPECT_EQ(item.options[2], "Zur Übergabe der Sache.");
  ASSERT_EQ(b.dropped.size(), 2u);
  for (const auto& d : b.dropped) EXPECT_EQ(d.error_kind, "DegenerateItem");
}

TEST(BuildEval, RefusesTrainSources) {
  const std::vector<ProvisionRecord> ps = {{"BGB", "1", "T", {}}};
  const std::vector<EvalSource> sources = {eval_source(ps[0])};
  const std::vector<UnitKey> keys = {unit_key(ps[0])};
  ScriptedTransport t(ScriptedTransport::always("{}"));
  ManualClock clock;
  auto gw = lt::scripted_gateway(t, clock);
  const auto idx = all(keys, Split::Train);
  EXPECT_EQ(error_of([&] { build_open_set("x", sources, gw, idx); }), ErrorKind::Contamination);
  EXPECT_EQ(error_of([&] { build_mcq_set("x", sources, gw, idx, 1); }), ErrorKind::Contamination);
  EXPECT_EQ(t.calls(), 0u);
}
