#include "legal_synth/run_config.hpp"

#include <set>

#include "legal_synth/text.hpp"

namespace legal_synth {

std::string_view to_string(StrategyChoice s) {
  switch (s) {
    case StrategyChoice::Standard: return "standard";
    case StrategyChoice::Graded: return "graded";
    case StrategyChoice::Both: return "both";
  }
  return "both";
}

SynthesisConfig RunConfig::synthesis_config(const TemplateSet& templates) const {
  SynthesisConfig s;
  s.standard_cap = standard_cap;
  s.levels = levels;
  s.l4_group_size = l4_group_size;
  s.l4_groups_per_law = l4_groups_per_law;
  s.l4_cross_law = l4_cross_law;
  s.seed = seed;
  s.templates = templates;
  return s;
}

DedupConfig RunConfig::dedup_config() const {
  DedupConfig d;
  d.threshold = dedup_threshold;
  d.shingle_size = shingle_size;
  return d;
}

void RunConfig::validate() const {
  if (corpus.empty()) fail(ErrorKind::Config, "config lists no corpus files");
  if (laws.empty()) fail(ErrorKind::Config, "law registry is empty");
  const auto reg = registry();
  for (const auto& c : corpus) {
    if (c.format == ProvisionFormat::RawText && c.law.empty()) {
      fail(ErrorKind::Config, "raw-text corpus " + c.path.string() + " needs a law");
    }
    if (!c.law.empty() && !reg.contains(c.law)) fail(ErrorKind::Config, "corpus law " + c.law + " is not registered");
  }
  if (standard_cap < 1) fail(ErrorKind::Config, "standard_cap must be >= 1");
  if (levels[3] && strategy != StrategyChoice::Standard && l4_group_size < 2) {
    fail(ErrorKind::Config, "l4 group_size must be >= 2");
  }
  if (l4_groups_per_law < 0) fail(ErrorKind::Config, "l4 groups_per_law must be >= 0");
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) fail(ErrorKind::Config, "dedup threshold must be in (0, 1]");
  if (shingle_size < 1) fail(ErrorKind::Config, "shingle_size must be >= 1");
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) fail(ErrorKind::Config, "test_ratio must be in (0, 1)");
  std::set<std::string> names;
  for (const auto& s : eval_sets) {
    if (s.name.empty() || !names.insert(s.name).second) fail(ErrorKind::Config, "eval set names must be unique");
    if (s.name.find_first_of("/\\") != std::string::npos) fail(ErrorKind::Config, "bad eval set name " + s.name);
    if (s.law_filter && !reg.contains(*s.law_filter)) {
      fail(ErrorKind::Config, "eval set " + s.name + " filters on unregistered law " + *s.law_filter);
    }
  }
  generator.validate();
  reviewer.validate();
  judge.validate();
  std::set<std::string> models;
  for (const auto& c : candidates) {
    c.validate();
    if (!models.insert(c.model_name).second) fail(ErrorKind::Config, "duplicate candidate model " + c.model_name);
  }
  if (out.empty()) fail(ErrorKind::Config, "output directory is empty");
}

namespace {

void check_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(ErrorKind::Config, std::string(where) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) fail(ErrorKind::Config, "unknown key " + std::string(where) + "." + k);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

BackendConfig default_backend(double temperature) {
  BackendConfig b;
  b.temperature = temperature;
  return b;
}

EvalSetSpec eval_set_from_json(const nlohmann::json& j) {
  check_keys(j, "eval_sets[]", {"name", "kind", "source", "law", "target_n"});
  EvalSetSpec s;
  s.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "open") {
    s.kind = EvalKind::Open;
  } else if (kind == "mcq") {
    s.kind = EvalKind::Mcq;
  } else {
    fail(ErrorKind::Config, "eval set kind must be open or mcq, got " + kind);
  }
  const auto source = j.at("source").get<std::string>();
  if (source == "statute") {
    s.source_kind = UnitKind::Statute;
  } else if (source == "passage") {
    s.source_kind = UnitKind::Passage;
  } else {
    fail(ErrorKind::Config, "eval set source must be statute or passage, got " + source);
  }
  if (j.contains("law") && !j["law"].is_null()) s.law_filter = j["law"].get<std::string>();
  s.target_n = j.at("target_n").get<std::size_t>();
  return s;
}

nlohmann::json to_json(const EvalSetSpec& s) {
  return {{"name", s.name},
          {"kind", to_string(s.kind)},
          {"source", s.source_kind == UnitKind::Statute ? "statute" : "passage"},
          {"law", s.law_filter ? nlohmann::json(*s.law_filter) : nlohmann::json(nullptr)},
          {"target_n", s.target_n}};
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config",
             {"corpus", "passages", "laws", "strategy", "levels", "standard_cap", "l4", "dedup", "seed", "split",
              "eval_sets", "backends", "replay", "record", "out", "templates"});
  RunConfig c;
  c.generator = default_backend(1.0);
  c.reviewer = default_backend(0.0);
  c.judge = default_backend(0.0);
  try {
    for (const auto& e : j.value("corpus", nlohmann::json::array())) {
      check_keys(e, "corpus[]", {"path", "format", "law"});
      CorpusSource s;
      s.path = resolve(base_dir, e.at("path").get<std::string>());
      const auto fmt = e.value("format", std::string("jsonl"));
      const auto parsed = provision_format_from_string(fmt);
      if (!parsed) fail(ErrorKind::Config, "unknown corpus format " + fmt);
      s.format = *parsed;
      s.law = e.value("law", std::string());
      c.corpus.push_back(std::move(s));
    }
    for (const auto& p : j.value("passages", nlohmann::json::array())) {
      c.passages.push_back(resolve(base_dir, p.get<std::string>()));
    }
    if (j.contains("laws")) c.laws = j["laws"].get<std::vector<std::string>>();
    if (j.contains("strategy")) {
      const auto s = j["strategy"].get<std::string>();
      if (s == "standard") {
        c.strategy = StrategyChoice::Standard;
      } else if (s == "graded") {
        c.strategy = StrategyChoice::Graded;
      } else if (s == "both") {
        c.strategy = StrategyChoice::Both;
      } else {
        fail(ErrorKind::Config, "strategy must be standard, graded or both, got " + s);
      }
    }
    if (j.contains("levels")) {
      const auto& lv = j["levels"];
      check_keys(lv, "levels", {"L1", "L2", "L3", "L4"});
      constexpr const char* kNames[] = {"L1", "L2", "L3", "L4"};
      for (std::size_t i = 0; i < 4; ++i) c.levels[i] = lv.value(kNames[i], c.levels[i]);
    }
    c.standard_cap = j.value("standard_cap", c.standard_cap);
    if (j.contains("l4")) {
      const auto& l4 = j["l4"];
      check_keys(l4, "l4", {"group_size", "groups_per_law", "cross_law"});
      c.l4_group_size = l4.value("group_size", c.l4_group_size);
      c.l4_groups_per_law = l4.value("groups_per_law", c.l4_groups_per_law);
      c.l4_cross_law = l4.value("cross_law", c.l4_cross_law);
    }
    if (j.contains("dedup")) {
      const auto& d = j["dedup"];
      check_keys(d, "dedup", {"threshold", "shingle_size"});
      c.dedup_threshold = d.value("threshold", c.dedup_threshold);
      c.shingle_size = d.value("shingle_size", c.shingle_size);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("split")) {
      const auto& s = j["split"];
      check_keys(s, "split", {"seed", "test_ratio"});
      if (s.contains("seed")) c.split_seed = s["seed"].get<std::uint64_t>();
      c.test_ratio = s.value("test_ratio", c.test_ratio);
    }
    if (j.contains("eval_sets")) {
      c.eval_sets.clear();
      for (const auto& e : j["eval_sets"]) c.eval_sets.push_back(eval_set_from_json(e));
    }
    if (j.contains("backends")) {
      const auto& b = j["backends"];
      check_keys(b, "backends", {"generator", "reviewer", "judge", "candidates"});
      if (b.contains("generator")) c.generator = backend_config_from_json(b["generator"], c.generator);
      if (b.contains("reviewer")) c.reviewer = backend_config_from_json(b["reviewer"], c.reviewer);
      if (b.contains("judge")) c.judge = backend_config_from_json(b["judge"], c.judge);
      for (const auto& cand : b.value("candidates", nlohmann::json::array())) {
        c.candidates.push_back(backend_config_from_json(cand, default_backend(0.0)));
      }
    }
    if (j.contains("replay") && !j["replay"].is_null()) c.replay = resolve(base_dir, j["replay"].get<std::string>());
    if (j.contains("record") && !j["record"].is_null()) c.record = resolve(base_dir, j["record"].get<std::string>());
    if (j.contains("out")) c.out = resolve(base_dir, j["out"].get<std::string>());
    if (j.contains("templates") && !j["templates"].is_null()) {
      c.templates_dir = resolve(base_dir, j["templates"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("bad config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path), nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("cannot read config: ") + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  auto corpus = nlohmann::json::array();
  for (const auto& s : c.corpus) {
    corpus.push_back({{"path", s.path.generic_string()},
                      {"format", s.format == ProvisionFormat::Jsonl ? "jsonl" : "raw"},
                      {"law", s.law}});
  }
  auto passages = nlohmann::json::array();
  for (const auto& p : c.passages) passages.push_back(p.generic_string());
  auto evals = nlohmann::json::array();
  for (const auto& s : c.eval_sets) evals.push_back(to_json(s));
  auto candidates = nlohmann::json::array();
  for (const auto& b : c.candidates) candidates.push_back(to_json(b));
  auto opt_path = [](const std::optional<std::filesystem::path>& p) {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
  };
  nlohmann::json split{{"test_ratio", c.test_ratio}};
  if (c.split_seed) split["seed"] = *c.split_seed;
  return {{"corpus", corpus},
          {"passages", passages},
          {"laws", c.laws},
          {"strategy", to_string(c.strategy)},
          {"levels", {{"L1", c.levels[0]}, {"L2", c.levels[1]}, {"L3", c.levels[2]}, {"L4", c.levels[3]}}},
          {"standard_cap", c.standard_cap},
          {"l4", {{"group_size", c.l4_group_size}, {"groups_per_law", c.l4_groups_per_law}, {"cross_law", c.l4_cross_law}}},
          {"dedup", {{"threshold", c.dedup_threshold}, {"shingle_size", c.shingle_size}}},
          {"seed", c.seed},
          {"split", split},
          {"eval_sets", evals},
          {"backends",
           {{"generator", to_json(c.generator)},
            {"reviewer", to_json(c.reviewer)},
            {"judge", to_json(c.judge)},
            {"candidates", candidates}}},
          {"replay", opt_path(c.replay)},
          {"record", opt_path(c.record)},
          {"out", c.out.generic_string()},
          {"templates", opt_path(c.templates_dir)}};
}

}  // namespace legal_synth
