#include "legal_synth/eval_builder.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "legal_synth/hashing.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

std::string_view to_string(EvalKind k) { return k == EvalKind::Open ? "open" : "mcq"; }

nlohmann::json to_json(const EvalItem& item) {
  auto refs = nlohmann::json::array();
  for (const auto& r : item.source_refs) refs.push_back(r.canonical());
  nlohmann::json j{{"item_id", item.item_id},
                   {"kind", to_string(item.kind)},
                   {"context", item.context ? nlohmann::json(*item.context) : nlohmann::json(nullptr)},
                   {"question", item.question},
                   {"source_refs", refs}};
  if (item.kind == EvalKind::Open) {
    j["reference_answer"] = item.reference_answer;
  } else {
    j["options"] = item.options;
    j["gold_index"] = item.gold_index;
  }
  return j;
}

EvalItem eval_item_from_json(const nlohmann::json& j) {
  try {
    EvalItem item;
    item.item_id = j.at("item_id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "open" && kind != "mcq") fail(ErrorKind::Schema, "bad eval kind '" + kind + "'");
    item.kind = kind == "open" ? EvalKind::Open : EvalKind::Mcq;
    if (j.contains("context") && j["context"].is_string()) item.context = j["context"].get<std::string>();
    item.question = j.at("question").get<std::string>();
    for (const auto& r : j.at("source_refs")) item.source_refs.push_back(UnitKey::parse(r.get<std::string>()));
    if (item.kind == EvalKind::Open) {
      item.reference_answer = j.at("reference_answer").get<std::string>();
      if (item.reference_answer.empty()) fail(ErrorKind::Schema, item.item_id + ": empty reference answer");
    } else {
      item.options = j.at("options").get<std::vector<std::string>>();
      item.gold_index = j.at("gold_index").get<int>();
      if (item.options.size() != kMcqOptions || item.gold_index < 0 ||
          item.gold_index >= static_cast<int>(kMcqOptions)) {
        fail(ErrorKind::Schema, item.item_id + ": mcq needs four options and gold_index in 0..3");
      }
    }
    return item;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad eval item: ") + e.what());
  }
}

EvalSource eval_source(const ProvisionRecord& p) {
  return EvalSource{unit_key(p), render_section_block(std::span(&p, 1)), std::nullopt};
}

EvalSource eval_source(const PassageRecord& p) { return EvalSource{unit_key(p), p.text, p.text}; }

const std::vector<EvalSetSpec>& default_eval_sets() {
  static const std::vector<EvalSetSpec> sets = {
      {"legalmc4_qa", EvalKind::Open, UnitKind::Passage, std::nullopt, 732},
      {"bgb_qa", EvalKind::Open, UnitKind::Statute, "BGB", 715},
      {"legalmc4_mcq", EvalKind::Mcq, UnitKind::Passage, std::nullopt, 1315},
      {"bgb_mcq", EvalKind::Mcq, UnitKind::Statute, "BGB", 1845},
  };
  return sets;
}

std::vector<EvalSource> select_eval_sources(const EvalSetSpec& spec, std::span<const ProvisionRecord> provisions,
                                            std::span<const PassageRecord> passages, const SplitIndex& splits,
                                            std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, EvalSource>> ranked;
  auto consider = [&](EvalSource src) {
    if (!splits.contains(src.key) || splits.at(src.key) != Split::Test) return;
    const auto rank = hash64("eval-select\x1f" + spec.name + "\x1f" + std::to_string(seed) + "\x1f" + src.key.canonical());
    ranked.emplace_back(rank, std::move(src));
  };
  if (spec.source_kind == UnitKind::Statute) {
    for (const auto& p : provisions) {
      if (!spec.law_filter || p.law_id == *spec.law_filter) consider(eval_source(p));
    }
  } else {
    for (const auto& p : passages) consider(eval_source(p));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second.key < b.second.key;
  });
  std::vector<EvalSource> out;
  for (auto& [_, src] : ranked) {
    if (out.size() == spec.target_n) break;
    out.push_back(std::move(src));
  }
  return out;
}

namespace {

void require_test_split(std::span<const EvalSource> sources, const SplitIndex& splits) {
  for (const auto& s : sources) {
    if (splits.at(s.key) != Split::Test) {
      fail(ErrorKind::Contamination, "eval source " + s.key.canonical() + " is not in the test split");
    }
  }
}

std::optional<std::string> string_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) return std::nullopt;
  auto s = std::string(trim(j[key].get_ref<const std::string&>()));
  if (s.empty()) return std::nullopt;
  return s;
}

std::string item_id(std::string_view set_name, const UnitKey& key) {
  return std::string(set_name) + ":" + key.canonical();
}

std::vector<std::vector<Message>> prompts_for(std::span<const EvalSource> sources, const std::string& tpl) {
  std::vector<std::vector<Message>> requests;
  for (const auto& s : sources) requests.push_back(user_prompt(render_template(tpl, {{"section_text", s.prompt_text}})));
  return requests;
}

}  // namespace

EvalBuild build_open_set(std::string_view set_name, std::span<const EvalSource> sources, Gateway& gateway,
                         const SplitIndex& splits, const TemplateSet& templates) {
  require_test_split(sources, splits);
  const auto outcomes = gateway.complete_all(prompts_for(sources, templates.get("eval_open")));
  EvalBuild build;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto id = item_id(set_name, sources[i].key);
    if (!outcomes[i].ok()) {
      build.dropped.push_back({id, std::string(to_string(outcomes[i].error_kind)), outcomes[i].error});
      continue;
    }
    const auto j = recover_json(*outcomes[i].text, JsonShape::Object);
    const auto q = j ? string_field(j->value, "question") : std::nullopt;
    const auto a = j ? string_field(j->value, "answer") : std::nullopt;
    if (!q || !a) {
      build.dropped.push_back({id, std::string(to_string(ErrorKind::ParseFailure)), "expected {question, answer}"});
      continue;
    }
    EvalItem item;
    item.item_id = id;
    item.kind = EvalKind::Open;
    item.context = sources[i].context;
    item.question = *q;
    item.reference_answer = *a;
    item.source_refs = {sources[i].key};
    build.items.push_back(std::move(item));
  }
  return build;
}

std::pair<std::vector<std::string>, int> shuffle_options(const std::string& correct,
                                                         const std::vector<std::string>& distractors,
                                                         std::string_view item_id, std::uint64_t seed) {
  if (distractors.size() + 1 != kMcqOptions) fail(ErrorKind::DegenerateItem, "need exactly three distractors");
  std::array<int, kMcqOptions> perm = {0, 1, 2, 3};
  auto pick = hash64("mcq-order\x1f" + std::to_string(seed) + "\x1f" + std::string(item_id)) % 24;
  for (std::uint64_t k = 0; k < pick; ++k) std::next_permutation(perm.begin(), perm.end());
  std::vector<std::string> options(kMcqOptions);
  int gold = -1;
  for (std::size_t k = 0; k < kMcqOptions; ++k) {
    options[k] = perm[k] == 0 ? correct : distractors[static_cast<std::size_t>(perm[k] - 1)];
    if (perm[k] == 0) gold = static_cast<int>(k);
  }
  return {std::move(options), gold};
}

EvalBuild build_mcq_set(std::string_view set_name, std::span<const EvalSource> sources, Gateway& gateway,
                        const SplitIndex& splits, std::uint64_t seed, const TemplateSet& templates) {
  require_test_split(sources, splits);
  const auto outcomes = gateway.complete_all(prompts_for(sources, templates.get("eval_mcq")));
  EvalBuild build;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto id = item_id(set_name, sources[i].key);
    if (!outcomes[i].ok()) {
      build.dropped.push_back({id, std::string(to_string(outcomes[i].error_kind)), outcomes[i].error});
      continue;
    }
    const auto j = recover_json(*outcomes[i].text, JsonShape::Object);
    const auto q = j ? string_field(j->value, "question") : std::nullopt;
    const auto correct = j ? string_field(j->value, "correct_answer") : std::nullopt;
    std::vector<std::string> distractors;
    bool distractors_ok = j && j->value.contains("distractors") && j->value["distractors"].is_array();
    if (distractors_ok) {
      for (const auto& d : j->value["distractors"]) {
        if (!d.is_string()) {
          distractors_ok = false;
          break;
        }
        distractors.emplace_back(trim(d.get_ref<const std::string&>()));
      }
    }
    if (!q || !correct || !distractors_ok) {
      build.dropped.push_back({id, std::string(to_string(ErrorKind::ParseFailure)),
                               "expected {question, correct_answer, distractors[3]}"});
      continue;
    }
    if (distractors.size() != kMcqOptions - 1) {
      build.dropped.push_back({id, std::string(to_string(ErrorKind::DegenerateItem)),
                               "expected 3 distractors, got " + std::to_string(distractors.size())});
      continue;
    }
    std::set<std::string> distinct{casefold(*correct)};
    bool degenerate = false;
    for (const auto& d : distractors) degenerate |= d.empty() || !distinct.insert(casefold(d)).second;
    if (degenerate) {
      build.dropped.push_back({id, std::string(to_string(ErrorKind::DegenerateItem)), "options are not pairwise distinct"});
      continue;
    }
    EvalItem item;
    item.item_id = id;
    item.kind = EvalKind::Mcq;
    item.context = sources[i].context;
    item.question = *q;
    std::tie(item.options, item.gold_index) = shuffle_options(*correct, distractors, id, seed);
    item.source_refs = {sources[i].key};
    build.items.push_back(std::move(item));
  }
  return build;
}

}  // namespace legal_synth
