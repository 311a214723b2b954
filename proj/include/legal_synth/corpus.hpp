#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "legal_synth/error.hpp"

namespace legal_synth {

// Declared statute codes. Configuration, not code: runs may extend it.
class LawRegistry {
 public:
  LawRegistry() = default;
  explicit LawRegistry(std::vector<std::string> codes) : codes_(std::move(codes)) {}

  // BGB, StGB, SGB, GG.
  static LawRegistry defaults();

  bool contains(std::string_view code) const;
  const std::vector<std::string>& codes() const { return codes_; }

 private:
  std::vector<std::string> codes_;
};

struct ProvisionRecord {
  std::string law_id;
  std::string section_id;
  std::string text;
  std::optional<std::string> source_uri;

  bool operator==(const ProvisionRecord&) const = default;
};

struct PassageRecord {
  std::string doc_id;
  std::int64_t passage_id = 0;
  std::string text;
  std::string source_tag;

  bool operator==(const PassageRecord&) const = default;
};

enum class UnitKind { Statute, Passage };

// Identity of a grounding unit: a statute section or a document passage.
struct UnitKey {
  UnitKind kind = UnitKind::Statute;
  std::string scope;  // law_id or doc_id
  std::string id;     // section_id or passage ordinal

  static UnitKey statute(std::string law_id, std::string section_id);
  static UnitKey passage(std::string doc_id, std::int64_t passage_id);

  // "statute:BGB:433", "passage:7:0"
  std::string canonical() const;
  // "BGB § 433", "doc 7 passage 0"
  std::string display() const;
  static UnitKey parse(std::string_view canonical);

  auto operator<=>(const UnitKey&) const = default;
};

// Reading order: kind, scope, then natural section/passage order.
bool unit_key_less(const UnitKey& a, const UnitKey& b);

UnitKey unit_key(const ProvisionRecord& p);
UnitKey unit_key(const PassageRecord& p);

std::vector<ProvisionRecord> parse_statute_text(std::string_view raw, std::string_view law_id,
                                                const LawRegistry& registry = LawRegistry::defaults());

// Inverse of parse_statute_text for records whose text holds no heading lines.
std::string serialize_statute_text(std::span<const ProvisionRecord> records);

enum class ProvisionFormat { Jsonl, RawText };

std::optional<ProvisionFormat> provision_format_from_string(std::string_view s);

struct RowError {
  std::size_t row = 0;  // 1-based
  ErrorKind kind = ErrorKind::Schema;
  std::string message;
};

struct ProvisionLoad {
  std::vector<ProvisionRecord> records;
  std::vector<RowError> errors;
};

// Malformed JSONL rows are collected, not fatal. Raw-text input needs law_id
// and fails as a whole on NoSectionsFound/DuplicateSection.
ProvisionLoad load_provisions(const std::filesystem::path& path, ProvisionFormat format,
                              const LawRegistry& registry = LawRegistry::defaults(),
                              std::string_view law_id = {});

struct PassageLoad {
  std::vector<PassageRecord> records;
  std::vector<RowError> errors;
};

// Throws DuplicatePassage on a repeated (doc_id, passage_id).
PassageLoad load_passages(const std::filesystem::path& path, std::string_view default_source_tag = "legalmc4-de");

nlohmann::json to_json(const ProvisionRecord& p);
nlohmann::json to_json(const PassageRecord& p);
ProvisionRecord provision_from_json(const nlohmann::json& j);
PassageRecord passage_from_json(const nlohmann::json& j);

}  // namespace legal_synth
