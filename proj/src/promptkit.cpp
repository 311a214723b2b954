#include "legal_synth/promptkit.hpp"

#include <set>

#include "legal_synth/hashing.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

int level_cap(Level level, int standard_cap) {
  switch (level) {
    case Level::None: return standard_cap;
    case Level::L1: return 5;
    case Level::L2: return 5;
    case Level::L3: return 3;
    case Level::L4: return 3;
  }
  return 0;
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (const auto& [name, text] : builtin_template_sources()) {
    set.templates_.emplace(std::string(name), std::string(text));
  }
  return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorKind::Config, "template directory " + dir.string() + " does not exist");
  }
  TemplateSet set = builtin();
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    set.templates_[entry.path().stem().string()] = read_file(entry.path());
  }
  return set;
}

const std::string& TemplateSet::get(std::string_view name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) fail(ErrorKind::Config, "no template named '" + std::string(name) + "'");
  return it->second;
}

bool TemplateSet::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

std::map<std::string, std::string> TemplateSet::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, text] : templates_) out.emplace(name, sha256_hex(text));
  return out;
}

std::string_view TemplateSet::generation_template_name(Strategy strategy, Level level) {
  if (strategy == Strategy::Standard) {
    if (level != Level::None) fail(ErrorKind::UnknownLevel, "standard strategy has no level " + std::string(to_string(level)));
    return "standard";
  }
  switch (level) {
    case Level::L1: return "graded_l1";
    case Level::L2: return "graded_l2";
    case Level::L3: return "graded_l3";
    case Level::L4: return "graded_l4";
    case Level::None: break;
  }
  fail(ErrorKind::UnknownLevel, "graded strategy requires a level L1..L4");
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::set<std::string> used;
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const auto open = tpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    const auto close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    out.append(tpl.substr(pos, open - pos));
    const std::string name(tpl.substr(open + 2, close - open - 2));
    const auto it = values.find(name);
    if (it == values.end()) fail(ErrorKind::Config, "template placeholder {{" + name + "}} has no value");
    out.append(it->second);
    used.insert(name);
    pos = close + 2;
  }
  for (const auto& [name, _] : values) {
    if (!used.count(name)) fail(ErrorKind::Config, "template has no placeholder {{" + name + "}}");
  }
  return out;
}

std::string render_section_block(std::span<const ProvisionRecord> provisions) {
  std::string out;
  for (const auto& p : provisions) {
    if (!out.empty()) out.append("\n\n");
    out.append(p.law_id).append(" \xC2\xA7 ").append(p.section_id).push_back('\n');
    out.append(p.text);
  }
  return out;
}

GenerationTask render_generation_prompt(Strategy strategy, Level level,
                                        std::span<const ProvisionRecord> inputs,
                                        const TemplateSet& templates, int standard_cap) {
  const auto name = TemplateSet::generation_template_name(strategy, level);
  if (level == Level::L4) {
    if (inputs.size() < 2) {
      fail(ErrorKind::Arity, "L4 needs two or more sections, got " + std::to_string(inputs.size()));
    }
  } else if (inputs.size() != 1) {
    fail(ErrorKind::Arity, std::string(to_string(strategy)) + "/" + std::string(to_string(level)) +
                               " needs exactly one section, got " + std::to_string(inputs.size()));
  }
  GenerationTask task;
  task.strategy = strategy;
  task.level = level;
  task.inputs.assign(inputs.begin(), inputs.end());
  task.cap = level_cap(level, standard_cap);
  task.template_name = std::string(name);
  task.prompt_text = render_template(templates.get(name), {{"section_text", render_section_block(inputs)}});
  task.prompt_hash = sha256_hex(task.prompt_text);
  return task;
}

std::string render_review_prompt(std::string_view section_text, std::span<const QAPair> candidates,
                                 const TemplateSet& templates) {
  if (candidates.size() > kMaxReviewBatch) {
    fail(ErrorKind::TooManyCandidates, "review batch of " + std::to_string(candidates.size()) +
                                           " exceeds " + std::to_string(kMaxReviewBatch));
  }
  if (candidates.empty()) fail(ErrorKind::Arity, "review batch is empty");
  std::string pairs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) pairs.append("\n\n");
    pairs.append(std::to_string(i + 1)).append(". Q: ").append(candidates[i].question);
    pairs.append("\n   A: ").append(candidates[i].answer);
  }
  return render_template(templates.get("review"),
                         {{"section_text", std::string(section_text)}, {"qa_pairs", std::move(pairs)}});
}

RawGenerationOutput parse_generation_output(std::string_view raw, int cap) {
  auto recovered = recover_json(raw, JsonShape::Object);
  if (!recovered) fail(ErrorKind::ParseFailure, "no JSON object recoverable from generator output");
  const auto& root = recovered->value;
  if (!root.contains("qa_pairs") || !root["qa_pairs"].is_array()) {
    fail(ErrorKind::ParseFailure, "generator output has no qa_pairs array");
  }
  RawGenerationOutput out;
  out.step = recovered->step;
  if (out.step != RecoveryStep::Whole) {
    out.warnings.push_back("recovered JSON via " + std::string(to_string(out.step)) + " step");
  }
  std::size_t index = 0;
  for (const auto& item : root["qa_pairs"]) {
    ++index;
    if (!item.is_object() || !item.contains("question") || !item.contains("answer") ||
        !item["question"].is_string() || !item["answer"].is_string()) {
      out.warnings.push_back("skipped malformed pair #" + std::to_string(index));
      continue;
    }
    auto q = std::string(trim(item["question"].get_ref<const std::string&>()));
    auto a = std::string(trim(item["answer"].get_ref<const std::string&>()));
    if (q.empty() || a.empty()) {
      out.warnings.push_back("skipped pair #" + std::to_string(index) + " with empty field");
      continue;
    }
    out.qa_pairs.push_back({std::move(q), std::move(a)});
  }
  if (cap >= 0 && out.qa_pairs.size() > static_cast<std::size_t>(cap)) {
    out.warnings.push_back("truncated " + std::to_string(out.qa_pairs.size()) + " pairs to cap " +
                           std::to_string(cap));
    out.qa_pairs.resize(static_cast<std::size_t>(cap));
  }
  return out;
}

std::string_view to_string(Verdict v) { return v == Verdict::Yes ? "Yes" : "No"; }

namespace {

std::optional<int> read_local_id(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    const auto s = trim(v.get_ref<const std::string&>());
    if (s.empty() || s.size() > 6) return std::nullopt;
    int n = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return std::nullopt;
      n = n * 10 + (c - '0');
    }
    return n;
  }
  return std::nullopt;
}

std::optional<Verdict> read_verdict(const nlohmann::json& v) {
  if (!v.is_string()) return std::nullopt;
  const auto folded = casefold(trim(v.get_ref<const std::string&>()));
  if (folded == "yes") return Verdict::Yes;
  if (folded == "no") return Verdict::No;
  return std::nullopt;
}

}  // namespace

ReviewParse parse_review_output(std::string_view raw, std::span<const int> expected_ids) {
  ReviewParse out;
  struct Seen {
    bool any = false;
    bool saw_no = false;
    std::string reason;
  };
  std::map<int, Seen> seen;
  for (int id : expected_ids) seen.emplace(id, Seen{});

  const auto recovered = recover_json(raw, JsonShape::Array);
  if (!recovered) {
    out.parse_failed = true;
    out.warnings.emplace_back("reviewer output has no recoverable JSON list");
  } else {
    for (const auto& item : recovered->value) {
      if (!item.is_object() || !item.contains("qa_id") || !item.contains("quality_verdict")) {
        out.warnings.emplace_back("skipped malformed verdict entry");
        continue;
      }
      const auto id = read_local_id(item["qa_id"]);
      const auto verdict = read_verdict(item["quality_verdict"]);
      if (!id || !verdict) {
        out.warnings.emplace_back("skipped verdict entry with bad id or value");
        continue;
      }
      auto it = seen.find(*id);
      if (it == seen.end()) {
        out.warnings.push_back("rejected verdict for unexpected qa_id " + std::to_string(*id));
        continue;
      }
      auto& s = it->second;
      if (s.any) out.warnings.push_back("repeated verdict for qa_id " + std::to_string(*id));
      std::string reason;
      if (item.contains("reason") && item["reason"].is_string()) {
        reason = std::string(trim(item["reason"].get_ref<const std::string&>()));
      }
      // Conflicting or repeated entries resolve to No; the first No reason wins.
      if (*verdict == Verdict::No) {
        if (!s.saw_no) s.reason = reason;
        s.saw_no = true;
      } else if (!s.any) {
        s.reason = reason;
      }
      s.any = true;
    }
  }

  for (int id : expected_ids) {
    const auto& s = seen.at(id);
    ParsedVerdict v;
    v.local_id = id;
    if (out.parse_failed) {
      v.verdict = Verdict::No;
      v.reason = std::string(kUnparseableReason);
      v.defaulted = true;
    } else if (!s.any) {
      v.verdict = Verdict::No;
      v.reason = std::string(kNoVerdictReason);
      v.defaulted = true;
    } else {
      v.verdict = s.saw_no ? Verdict::No : Verdict::Yes;
      v.reason = s.reason.empty() ? std::string("no reason given") : s.reason;
    }
    out.verdicts.push_back(std::move(v));
  }
  return out;
}

}  // namespace legal_synth
