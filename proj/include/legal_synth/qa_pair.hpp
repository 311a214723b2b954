#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "legal_synth/corpus.hpp"

namespace legal_synth {

enum class Strategy { Standard, Graded };

// None is the "n/a" level carried by standard-strategy pairs.
enum class Level { None, L1, L2, L3, L4 };

enum class QAStatus { Candidate, Retained, Rejected, Duplicate };

std::string_view to_string(Strategy s);
std::string_view to_string(Level l);
std::string_view to_string(QAStatus s);

Strategy strategy_from_string(std::string_view s);
// Throws UnknownLevel.
Level level_from_string(std::string_view s);
QAStatus status_from_string(std::string_view s);

struct QAPair {
  std::string qa_id;
  std::string question;
  std::string answer;
  Strategy strategy = Strategy::Standard;
  Level level = Level::None;
  std::vector<UnitKey> source_refs;
  std::string gen_model;
  std::string prompt_hash;
  QAStatus status = QAStatus::Candidate;
  // Set when the text does not look German. Never used to drop a pair.
  bool language_flag = false;

  bool operator==(const QAPair&) const = default;
};

// Lifecycle is append-only: only Candidate may move, and only once.
void transition(QAPair& pair, QAStatus to);

nlohmann::json to_json(const QAPair& p);
QAPair qa_pair_from_json(const nlohmann::json& j);

}  // namespace legal_synth
