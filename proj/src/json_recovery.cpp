#include "legal_synth/json_recovery.hpp"

#include "legal_synth/text.hpp"

namespace legal_synth {

namespace {

constexpr int kMaxEmbeddedAttempts = 64;

std::optional<nlohmann::json> try_parse(std::string_view text, JsonShape shape) {
  auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false,
                                 /*ignore_comments=*/true);
  if (j.is_discarded()) return std::nullopt;
  if (shape == JsonShape::Object && !j.is_object()) return std::nullopt;
  if (shape == JsonShape::Array && !j.is_array()) return std::nullopt;
  return j;
}

std::optional<std::string_view> fenced_block(std::string_view raw) {
  const auto open = raw.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = raw.find('\n', open + 3);
  if (body_start == std::string_view::npos) return std::nullopt;
  ++body_start;
  const auto close = raw.find("```", body_start);
  if (close == std::string_view::npos) return raw.substr(body_start);
  return raw.substr(body_start, close - body_start);
}

// End (exclusive) of the balanced span starting at raw[start], honoring
// string literals and escapes.
std::optional<std::size_t> balanced_end(std::string_view raw, std::size_t start) {
  const char open = raw[start];
  const char close = open == '{' ? '}' : ']';
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == open) {
      ++depth;
    } else if (c == close) {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<RecoveredJson> recover_json(std::string_view raw, JsonShape shape) {
  if (auto j = try_parse(trim(raw), shape)) return RecoveredJson{std::move(*j), RecoveryStep::Whole};

  if (auto block = fenced_block(raw)) {
    if (auto j = try_parse(trim(*block), shape)) {
      return RecoveredJson{std::move(*j), RecoveryStep::Fenced};
    }
  }

  const char opener = shape == JsonShape::Object ? '{' : '[';
  int attempts = 0;
  for (auto pos = raw.find(opener); pos != std::string_view::npos && attempts < kMaxEmbeddedAttempts;
       pos = raw.find(opener, pos + 1), ++attempts) {
    const auto end = balanced_end(raw, pos);
    if (!end) continue;
    if (auto j = try_parse(raw.substr(pos, *end - pos), shape)) {
      return RecoveredJson{std::move(*j), RecoveryStep::Embedded};
    }
  }
  return std::nullopt;
}

std::string_view to_string(RecoveryStep step) {
  switch (step) {
    case RecoveryStep::Whole: return "whole";
    case RecoveryStep::Fenced: return "fenced";
    case RecoveryStep::Embedded: return "embedded";
  }
  return "whole";
}

}  // namespace legal_synth
