#include "legal_synth/qa_pair.hpp"

namespace legal_synth {

std::string_view to_string(Strategy s) {
  return s == Strategy::Standard ? "standard" : "graded";
}

std::string_view to_string(Level l) {
  switch (l) {
    case Level::None: return "n/a";
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::L3: return "L3";
    case Level::L4: return "L4";
  }
  return "n/a";
}

std::string_view to_string(QAStatus s) {
  switch (s) {
    case QAStatus::Candidate: return "candidate";
    case QAStatus::Retained: return "retained";
    case QAStatus::Rejected: return "rejected";
    case QAStatus::Duplicate: return "duplicate";
  }
  return "candidate";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "standard") return Strategy::Standard;
  if (s == "graded") return Strategy::Graded;
  fail(ErrorKind::Config, "unknown strategy '" + std::string(s) + "'");
}

Level level_from_string(std::string_view s) {
  if (s == "n/a") return Level::None;
  if (s == "L1") return Level::L1;
  if (s == "L2") return Level::L2;
  if (s == "L3") return Level::L3;
  if (s == "L4") return Level::L4;
  fail(ErrorKind::UnknownLevel, "unknown level '" + std::string(s) + "'");
}

QAStatus status_from_string(std::string_view s) {
  if (s == "candidate") return QAStatus::Candidate;
  if (s == "retained") return QAStatus::Retained;
  if (s == "rejected") return QAStatus::Rejected;
  if (s == "duplicate") return QAStatus::Duplicate;
  fail(ErrorKind::Schema, "unknown status '" + std::string(s) + "'");
}

void transition(QAPair& pair, QAStatus to) {
  if (pair.status == to) return;
  const bool allowed = pair.status == QAStatus::Candidate ||
                       (pair.status == QAStatus::Retained && to == QAStatus::Duplicate);
  if (!allowed) {
    fail(ErrorKind::Schema, "illegal status change " + std::string(to_string(pair.status)) + " -> " +
                                std::string(to_string(to)) + " for " + pair.qa_id);
  }
  pair.status = to;
}

nlohmann::json to_json(const QAPair& p) {
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& r : p.source_refs) refs.push_back(r.canonical());
  return {{"qa_id", p.qa_id},
          {"question", p.question},
          {"answer", p.answer},
          {"strategy", to_string(p.strategy)},
          {"level", to_string(p.level)},
          {"source_refs", std::move(refs)},
          {"gen_model", p.gen_model},
          {"prompt_hash", p.prompt_hash},
          {"status", to_string(p.status)},
          {"language_flag", p.language_flag}};
}

QAPair qa_pair_from_json(const nlohmann::json& j) {
  try {
    QAPair p;
    p.qa_id = j.at("qa_id").get<std::string>();
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    p.level = level_from_string(j.at("level").get<std::string>());
    for (const auto& r : j.at("source_refs")) p.source_refs.push_back(UnitKey::parse(r.get<std::string>()));
    p.gen_model = j.value("gen_model", std::string());
    p.prompt_hash = j.value("prompt_hash", std::string());
    p.status = status_from_string(j.value("status", std::string("candidate")));
    p.language_flag = j.value("language_flag", false);
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad QA pair record: ") + e.what());
  }
}

}  // namespace legal_synth
