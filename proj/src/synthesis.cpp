#include "legal_synth/synthesis.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "legal_synth/hashing.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

nlohmann::json to_json(const FailureRecord& f) {
  return {{"task_key", f.task_key}, {"error_kind", f.error_kind}, {"detail", f.detail}};
}

std::string task_key(const GenerationTask& task) {
  std::string key = std::string(to_string(task.strategy)) + "/";
  if (task.level != Level::None) key.append(to_string(task.level)).push_back('/');
  std::string law;
  for (const auto& p : task.inputs) {
    if (p.law_id != law) {
      if (!law.empty()) key.push_back('+');
      key.append(p.law_id).push_back(':');
      law = p.law_id;
    } else {
      key.push_back('+');
    }
    key.append(p.section_id);
  }
  return key;
}

std::vector<SectionGroup> form_section_groups(std::span<const ProvisionRecord> provisions,
                                              const SynthesisConfig& config) {
  if (config.l4_group_size < 2) fail(ErrorKind::Config, "l4_group_size must be >= 2");
  std::map<std::string, std::vector<UnitKey>> pools;
  for (const auto& p : provisions) pools[config.l4_cross_law ? std::string("*") : p.law_id].push_back(unit_key(p));

  std::vector<SectionGroup> groups;
  const auto g = static_cast<std::size_t>(config.l4_group_size);
  for (auto& [law, keys] : pools) {
    std::sort(keys.begin(), keys.end(), unit_key_less);
    SeededRng rng(hash64("section-groups\x1f" + law + "\x1f" + std::to_string(config.seed)));
    rng.shuffle(keys);
    std::size_t made = 0;
    for (std::size_t start = 0; start + g <= keys.size(); start += g) {
      if (config.l4_groups_per_law > 0 && made == static_cast<std::size_t>(config.l4_groups_per_law)) break;
      SectionGroup group{{keys.begin() + static_cast<std::ptrdiff_t>(start),
                          keys.begin() + static_cast<std::ptrdiff_t>(start + g)}};
      std::sort(group.members.begin(), group.members.end(), unit_key_less);
      groups.push_back(std::move(group));
      ++made;
    }
  }
  return groups;
}

namespace {

void run_tasks(std::vector<GenerationTask> tasks, Gateway& gateway, SynthesisResult& result) {
  result.tasks = tasks.size();
  std::vector<std::vector<Message>> requests;
  requests.reserve(tasks.size());
  for (const auto& t : tasks) requests.push_back(user_prompt(t.prompt_text));
  const auto outcomes = gateway.complete_all(requests);

  std::size_t failed = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    const auto& outcome = outcomes[i];
    const auto key = task_key(task);
    if (!outcome.ok()) {
      ++failed;
      result.failures.push_back({key, std::string(to_string(outcome.error_kind)), outcome.error});
      continue;
    }
    RawGenerationOutput parsed;
    try {
      parsed = parse_generation_output(*outcome.text, task.cap);
    } catch (const Error& e) {
      ++failed;
      result.failures.push_back({key, std::string(to_string(e.kind())), e.what()});
      continue;
    }
    for (const auto& w : parsed.warnings) result.warnings.push_back(key + ": " + w);
    for (auto& qa : parsed.qa_pairs) {
      QAPair pair;
      pair.question = std::move(qa.question);
      pair.answer = std::move(qa.answer);
      pair.strategy = task.strategy;
      pair.level = task.level;
      for (const auto& p : task.inputs) pair.source_refs.push_back(unit_key(p));
      pair.gen_model = gateway.config().model_name;
      pair.prompt_hash = task.prompt_hash;
      pair.language_flag = !looks_german(pair.question + "\n" + pair.answer);
      result.candidates.push_back(std::move(pair));
    }
  }
  if (!tasks.empty() && failed == tasks.size()) {
    fail(ErrorKind::AllTasksFailed, "all " + std::to_string(tasks.size()) + " generation tasks failed; first: " +
                                        result.failures.front().task_key + " " + result.failures.front().detail);
  }
  assign_qa_ids(result.candidates);
}

}  // namespace

SynthesisResult synthesize_standard(std::span<const ProvisionRecord> provisions, Gateway& gateway,
                                    const SynthesisConfig& config) {
  if (provisions.empty()) fail(ErrorKind::Config, "no provisions to synthesize from");
  std::vector<GenerationTask> tasks;
  tasks.reserve(provisions.size());
  for (const auto& p : provisions) {
    tasks.push_back(render_generation_prompt(Strategy::Standard, Level::None, std::span(&p, 1), config.templates,
                                             config.standard_cap));
  }
  SynthesisResult result;
  run_tasks(std::move(tasks), gateway, result);
  return result;
}

SynthesisResult synthesize_graded(std::span<const ProvisionRecord> provisions, Gateway& gateway,
                                  const SynthesisConfig& config) {
  if (provisions.empty()) fail(ErrorKind::Config, "no provisions to synthesize from");
  constexpr Level kSingle[] = {Level::L1, Level::L2, Level::L3};
  std::vector<GenerationTask> tasks;
  for (const auto& p : provisions) {
    for (std::size_t li = 0; li < 3; ++li) {
      if (!config.levels[li]) continue;
      tasks.push_back(render_generation_prompt(Strategy::Graded, kSingle[li], std::span(&p, 1), config.templates));
    }
  }
  SynthesisResult result;
  if (config.levels[3]) {
    std::map<UnitKey, const ProvisionRecord*> by_key;
    for (const auto& p : provisions) by_key.emplace(unit_key(p), &p);
    result.l4_groups = form_section_groups(provisions, config);
    for (const auto& g : result.l4_groups) {
      std::vector<ProvisionRecord> inputs;
      for (const auto& k : g.members) inputs.push_back(*by_key.at(k));
      tasks.push_back(render_generation_prompt(Strategy::Graded, Level::L4, inputs, config.templates));
    }
  }
  run_tasks(std::move(tasks), gateway, result);
  return result;
}

void assign_qa_ids(std::vector<QAPair>& pairs) {
  std::vector<std::string> bases(pairs.size());
  std::map<std::string, std::vector<std::size_t>> by_base;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::string key;
    for (const auto& r : pairs[i].source_refs) key.append(r.canonical()).push_back('|');
    key.push_back('\x1f');
    key.append(to_string(pairs[i].level));
    key.push_back('\x1f');
    key.append(pairs[i].question);
    bases[i] = sha256_hex(key).substr(0, 16);
    by_base[bases[i]].push_back(i);
  }
  for (auto& [base, idx] : by_base) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return pairs[a].answer < pairs[b].answer; });
    for (std::size_t k = 0; k < idx.size(); ++k) {
      pairs[idx[k]].qa_id = k == 0 ? base : base + "-" + std::to_string(k);
    }
  }
}

bool looks_german(std::string_view text) {
  static constexpr std::string_view kMarks[] = {"\xC3\xA4", "\xC3\xB6", "\xC3\xBC", "\xC3\x84",
                                                "\xC3\x96", "\xC3\x9C", "\xC3\x9F"};
  for (auto m : kMarks) {
    if (text.find(m) != std::string_view::npos) return true;
  }
  static const std::set<std::string, std::less<>> kWords = {
      "der", "die", "das", "und", "ist", "nicht", "ein", "eine", "zu", "von", "mit", "den", "dem",
      "des", "im", "auf", "wenn", "kann", "nach", "oder", "wird", "sich", "bei", "als", "auch"};
  std::set<std::string> hits;
  for (auto& t : fold_tokens(text)) {
    if (kWords.count(t)) hits.insert(std::move(t));
    if (hits.size() >= 2) return true;
  }
  return false;
}

}  // namespace legal_synth
