#pragma once

#include <optional>
#include <string_view>

#include <json.hpp>

namespace legal_synth {

enum class JsonShape { Object, Array };

enum class RecoveryStep { Whole, Fenced, Embedded };

struct RecoveredJson {
  nlohmann::json value;
  RecoveryStep step = RecoveryStep::Whole;
};

// Bounded repair ladder for model output that should have been strict JSON:
// parse the whole text, then the first code-fenced block, then the first
// balanced {...} or [...] span that parses. Comments are tolerated because
// models echo the "// Up to 5 pairs" hints from the prompts.
std::optional<RecoveredJson> recover_json(std::string_view raw, JsonShape shape);

std::string_view to_string(RecoveryStep step);

}  // namespace legal_synth
