#include "legal_synth/scorer.hpp"

#include <iomanip>
#include <set>
#include <sstream>

#include "legal_synth/json_recovery.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

nlohmann::json to_json(const ModelAnswer& a) {
  nlohmann::json j{{"item_id", a.item_id}, {"raw_text", a.raw_text}};
  j["option"] = a.option ? nlohmann::json(*a.option) : nlohmann::json(nullptr);
  j["text"] = a.text ? nlohmann::json(*a.text) : nlohmann::json(nullptr);
  j["error"] = a.error;
  return j;
}

ModelAnswer model_answer_from_json(const nlohmann::json& j) {
  try {
    ModelAnswer a;
    a.item_id = j.at("item_id").get<std::string>();
    a.raw_text = j.value("raw_text", std::string());
    if (j.contains("option") && j["option"].is_number_integer()) a.option = j["option"].get<int>();
    if (j.contains("text") && j["text"].is_string()) a.text = j["text"].get<std::string>();
    a.error = j.value("error", std::string());
    return a;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad model answer: ") + e.what());
  }
}

namespace {

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'A' && u <= 'Z') || (u >= 'a' && u <= 'z') || u == '_' || u >= 0x80;
}

constexpr char kLetters[] = {'A', 'B', 'C', 'D'};

}  // namespace

std::optional<int> extract_option(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const char c = reply[i];
    const char up = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
    if (up < 'A' || up > 'D') continue;
    if (i > 0 && is_word_byte(reply[i - 1])) continue;
    if (i + 1 < reply.size() && is_word_byte(reply[i + 1])) continue;
    return up - 'A';
  }
  return std::nullopt;
}

std::string render_candidate_prompt(const EvalItem& item, const TemplateSet& templates) {
  std::string context_block = item.context ? "\nKontext:\n" + *item.context + "\n" : std::string();
  if (item.kind == EvalKind::Open) {
    return render_template(templates.get("candidate_open"),
                           {{"context_block", context_block}, {"question", item.question}});
  }
  std::string options;
  for (std::size_t k = 0; k < item.options.size(); ++k) {
    if (k) options.push_back('\n');
    options.push_back(kLetters[k]);
    options.append(") ").append(item.options[k]);
  }
  return render_template(templates.get("candidate_mcq"),
                         {{"context_block", context_block}, {"question", item.question}, {"options", options}});
}

std::vector<ModelAnswer> run_candidate(std::span<const EvalItem> items, Gateway& candidate,
                                       const TemplateSet& templates) {
  std::vector<std::vector<Message>> requests;
  requests.reserve(items.size());
  for (const auto& item : items) requests.push_back(user_prompt(render_candidate_prompt(item, templates)));
  const auto outcomes = candidate.complete_all(requests);
  std::vector<ModelAnswer> answers;
  answers.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    ModelAnswer a;
    a.item_id = items[i].item_id;
    if (!outcomes[i].ok()) {
      a.error = std::string(to_string(outcomes[i].error_kind)) + ": " + outcomes[i].error;
    } else {
      a.raw_text = *outcomes[i].text;
      if (items[i].kind == EvalKind::Mcq) {
        a.option = extract_option(a.raw_text);
      } else if (auto t = trim(a.raw_text); !t.empty()) {
        a.text = std::string(t);
      }
    }
    answers.push_back(std::move(a));
  }
  return answers;
}

std::int64_t ScoreEntry::accuracy_tenths() const {
  if (n == 0) return 0;
  const auto num = static_cast<std::int64_t>(correct) * 2000 + static_cast<std::int64_t>(n);
  return num / (2 * static_cast<std::int64_t>(n));
}

std::string format_tenths(std::int64_t tenths) {
  const bool neg = tenths < 0;
  const auto a = neg ? -tenths : tenths;
  return (neg ? "-" : "") + std::to_string(a / 10) + "." + std::to_string(a % 10);
}

namespace {

std::map<std::string, const ModelAnswer*> index_answers(std::span<const ModelAnswer> answers,
                                                        std::span<const EvalItem> items, std::string_view set_name) {
  std::map<std::string, const ModelAnswer*> by_id;
  for (const auto& a : answers) {
    if (!by_id.emplace(a.item_id, &a).second) {
      fail(ErrorKind::SetMismatch, std::string(set_name) + ": duplicate answer for " + a.item_id);
    }
  }
  std::set<std::string> ids;
  for (const auto& item : items) ids.insert(item.item_id);
  if (ids.size() != by_id.size()) {
    fail(ErrorKind::SetMismatch, std::string(set_name) + ": " + std::to_string(by_id.size()) + " answers for " +
                                     std::to_string(ids.size()) + " items");
  }
  for (const auto& id : ids) {
    if (!by_id.count(id)) fail(ErrorKind::SetMismatch, std::string(set_name) + ": no answer for " + id);
  }
  return by_id;
}

}  // namespace

ScoreEntry score_mcq(std::string_view set_name, std::span<const ModelAnswer> answers, std::span<const EvalItem> items) {
  const auto by_id = index_answers(answers, items, set_name);
  ScoreEntry e{std::string(set_name), EvalKind::Mcq, items.size(), 0};
  for (const auto& item : items) {
    if (item.kind != EvalKind::Mcq) fail(ErrorKind::SetMismatch, item.item_id + " is not a multiple-choice item");
    const auto* a = by_id.at(item.item_id);
    if (a->option && *a->option == item.gold_index) ++e.correct;
  }
  return e;
}

nlohmann::json to_json(const JudgedItem& j) {
  return {{"item_id", j.item_id}, {"correct", j.correct}, {"rationale", j.rationale}, {"judge_failed", j.judge_failed}};
}

JudgeResult judge_open(std::string_view set_name, std::span<const ModelAnswer> answers,
                       std::span<const EvalItem> items, Gateway& judge, const TemplateSet& templates) {
  const auto by_id = index_answers(answers, items, set_name);
  std::vector<std::vector<Message>> requests;
  std::vector<std::size_t> asked;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].kind != EvalKind::Open) fail(ErrorKind::SetMismatch, items[i].item_id + " is not an open item");
    const auto* a = by_id.at(items[i].item_id);
    if (!a->text) continue;
    requests.push_back(user_prompt(render_template(templates.get("judge"),
                                                   {{"question", items[i].question},
                                                    {"reference_answer", items[i].reference_answer},
                                                    {"candidate_answer", *a->text}})));
    asked.push_back(i);
  }
  const auto outcomes = judge.complete_all(requests);

  JudgeResult result;
  result.entry = ScoreEntry{std::string(set_name), EvalKind::Open, items.size(), 0};
  result.judgments.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    result.judgments[i] = JudgedItem{items[i].item_id, false, "no candidate answer", false};
  }
  for (std::size_t k = 0; k < asked.size(); ++k) {
    auto& jdg = result.judgments[asked[k]];
    const auto& o = outcomes[k];
    if (!o.ok()) {
      jdg.judge_failed = true;
      jdg.rationale = "judge call failed: " + o.error;
      continue;
    }
    const auto j = recover_json(*o.text, JsonShape::Object);
    std::optional<bool> verdict;
    if (j && j->value.contains("verdict") && j->value["verdict"].is_string()) {
      const auto v = casefold(trim(j->value["verdict"].get_ref<const std::string&>()));
      if (v == "correct") verdict = true;
      if (v == "incorrect") verdict = false;
    }
    if (!verdict) {
      jdg.judge_failed = true;
      jdg.rationale = "judge verdict could not be parsed";
      continue;
    }
    jdg.correct = *verdict;
    jdg.rationale = j->value.contains("rationale") && j->value["rationale"].is_string()
                        ? j->value["rationale"].get<std::string>()
                        : std::string();
    if (jdg.correct) ++result.entry.correct;
  }
  return result;
}

nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json sets = nlohmann::json::object();
  for (const auto& [name, e] : r.sets) {
    sets[name] = {{"kind", to_string(e.kind)},
                  {"n", e.n},
                  {"correct", e.correct},
                  {"accuracy", format_tenths(e.accuracy_tenths())}};
  }
  return {{"model", r.model}, {"sets", sets}};
}

ScoreReport score_report_from_json(const nlohmann::json& j) {
  try {
    ScoreReport r;
    r.model = j.at("model").get<std::string>();
    for (const auto& [name, e] : j.at("sets").items()) {
      r.sets[name] = ScoreEntry{name, e.at("kind").get<std::string>() == "open" ? EvalKind::Open : EvalKind::Mcq,
                                e.at("n").get<std::size_t>(), e.at("correct").get<std::size_t>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad score report: ") + e.what());
  }
}

std::string format_delta(std::int64_t tenths) {
  return (tenths < 0 ? "" : "+") + format_tenths(tenths);
}

std::string_view delta_arrow(std::int64_t tenths) {
  if (tenths > 0) return "\xE2\x86\x91";
  if (tenths < 0) return "\xE2\x86\x93";
  return "\xE2\x86\x92";
}

DeltaTable compare(const ScoreReport& base, const ScoreReport& adapted) {
  if (base.sets.size() != adapted.sets.size()) {
    fail(ErrorKind::SetMismatch, base.model + " and " + adapted.model + " were scored on different sets");
  }
  DeltaTable t{base.model, adapted.model, {}};
  for (const auto& [name, b] : base.sets) {
    const auto it = adapted.sets.find(name);
    if (it == adapted.sets.end()) fail(ErrorKind::SetMismatch, adapted.model + " has no score for " + name);
    if (it->second.n != b.n) {
      fail(ErrorKind::SetMismatch, name + ": n differs (" + std::to_string(b.n) + " vs " +
                                       std::to_string(it->second.n) + ")");
    }
    t.rows.push_back({name, b.accuracy_tenths(), it->second.accuracy_tenths()});
  }
  return t;
}

nlohmann::json to_json(const DeltaTable& t) {
  auto rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"set", r.set_name},
                    {"base", format_tenths(r.base_tenths)},
                    {"adapted", format_tenths(r.adapted_tenths)},
                    {"delta", format_delta(r.delta_tenths())},
                    {"direction", delta_arrow(r.delta_tenths())}});
  }
  return {{"base_model", t.base_model}, {"adapted_model", t.adapted_model}, {"rows", rows}};
}

namespace {

// Display width of a UTF-8 string (one column per code point).
std::size_t display_width(std::string_view s) {
  std::size_t w = 0;
  for (char c : s) w += (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  return w;
}

std::string pad_left(const std::string& s, std::size_t width) {
  const auto w = display_width(s);
  return w >= width ? s : std::string(width - w, ' ') + s;
}

}  // namespace

std::string render_score_table(const ScoreReport& base, std::span<const ScoreReport> adapted) {
  std::vector<std::string> sets;
  for (const auto& [name, _] : base.sets) sets.push_back(name);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Model"};
  header.insert(header.end(), sets.begin(), sets.end());
  rows.push_back(header);
  std::vector<std::string> base_row{base.model};
  for (const auto& s : sets) base_row.push_back(format_tenths(base.sets.at(s).accuracy_tenths()));
  rows.push_back(base_row);
  for (const auto& a : adapted) {
    const auto t = compare(base, a);
    std::vector<std::string> row{a.model};
    for (const auto& r : t.rows) {
      row.push_back(format_tenths(r.adapted_tenths) + " " + std::string(delta_arrow(r.delta_tenths())) +
                    format_tenths(r.delta_tenths() < 0 ? -r.delta_tenths() : r.delta_tenths()));
    }
    rows.push_back(row);
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], display_width(r[c]));
  }
  std::ostringstream os;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const auto& r = rows[ri];
    os << r[0] << std::string(widths[0] - display_width(r[0]), ' ');
    for (std::size_t c = 1; c < r.size(); ++c) os << "  " << pad_left(r[c], widths[c]);
    os << '\n';
    if (ri == 0) {
      std::size_t total = widths[0];
      for (std::size_t c = 1; c < widths.size(); ++c) total += 2 + widths[c];
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace legal_synth
