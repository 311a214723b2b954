#include "legal_synth/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <utility>

#include "legal_synth/text.hpp"

namespace legal_synth {

namespace {

constexpr std::string_view kSectionSign = "\xC2\xA7";

bool is_hspace(char c) { return c == ' ' || c == '\t'; }

struct Heading {
  std::string label;
  std::string_view rest;
};

// A heading is a line-anchored section sign, optional blanks, then a label
// made of digits and at most one lowercase letter, then a blank or the end.
std::optional<Heading> match_heading(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && is_hspace(line[i])) ++i;
  if (line.compare(i, kSectionSign.size(), kSectionSign) != 0) return std::nullopt;
  i += kSectionSign.size();
  while (i < line.size() && is_hspace(line[i])) ++i;
  const std::size_t start = i;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i == start) return std::nullopt;
  if (i < line.size() && line[i] >= 'a' && line[i] <= 'z') ++i;
  if (i < line.size() && !is_hspace(line[i])) return std::nullopt;
  return Heading{std::string(line.substr(start, i - start)), line.substr(i)};
}

std::string json_id_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return {};
}

}  // namespace

LawRegistry LawRegistry::defaults() { return LawRegistry({"BGB", "StGB", "SGB", "GG"}); }

bool LawRegistry::contains(std::string_view code) const {
  return std::find(codes_.begin(), codes_.end(), code) != codes_.end();
}

UnitKey UnitKey::statute(std::string law_id, std::string section_id) {
  return UnitKey{UnitKind::Statute, std::move(law_id), std::move(section_id)};
}

UnitKey UnitKey::passage(std::string doc_id, std::int64_t passage_id) {
  return UnitKey{UnitKind::Passage, std::move(doc_id), std::to_string(passage_id)};
}

std::string UnitKey::canonical() const {
  return (kind == UnitKind::Statute ? "statute:" : "passage:") + scope + ":" + id;
}

std::string UnitKey::display() const {
  if (kind == UnitKind::Statute) return scope + " \xC2\xA7 " + id;
  return "doc " + scope + " passage " + id;
}

UnitKey UnitKey::parse(std::string_view canonical) {
  const auto first = canonical.find(':');
  const auto last = canonical.rfind(':');
  if (first == std::string_view::npos || first == last) {
    fail(ErrorKind::Schema, "malformed unit key '" + std::string(canonical) + "'");
  }
  const auto kind = canonical.substr(0, first);
  UnitKey key;
  if (kind == "statute") {
    key.kind = UnitKind::Statute;
  } else if (kind == "passage") {
    key.kind = UnitKind::Passage;
  } else {
    fail(ErrorKind::Schema, "unknown unit kind in '" + std::string(canonical) + "'");
  }
  key.scope = std::string(canonical.substr(first + 1, last - first - 1));
  key.id = std::string(canonical.substr(last + 1));
  if (key.scope.empty() || key.id.empty()) {
    fail(ErrorKind::Schema, "malformed unit key '" + std::string(canonical) + "'");
  }
  return key;
}

bool unit_key_less(const UnitKey& a, const UnitKey& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.scope != b.scope) return a.scope < b.scope;
  if (a.id == b.id) return false;
  return section_label_less(a.id, b.id);
}

UnitKey unit_key(const ProvisionRecord& p) { return UnitKey::statute(p.law_id, p.section_id); }
UnitKey unit_key(const PassageRecord& p) { return UnitKey::passage(p.doc_id, p.passage_id); }

std::vector<ProvisionRecord> parse_statute_text(std::string_view raw, std::string_view law_id,
                                                const LawRegistry& registry) {
  if (law_id.empty() || !registry.contains(law_id)) {
    fail(ErrorKind::UnknownLaw, "law code '" + std::string(law_id) + "' is not in the registry");
  }
  struct Open {
    std::string label;
    std::string body;
  };
  std::vector<Open> sections;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    const auto line = raw.substr(start, end - start);
    if (auto h = match_heading(line)) {
      sections.push_back({std::move(h->label), std::string(h->rest)});
    } else if (!sections.empty()) {
      sections.back().body.push_back('\n');
      sections.back().body.append(line);
    }
    if (end == raw.size()) break;
    start = end + 1;
  }
  if (sections.empty()) {
    fail(ErrorKind::NoSectionsFound, "no section headings found for " + std::string(law_id));
  }

  std::vector<ProvisionRecord> out;
  out.reserve(sections.size());
  std::set<std::string> seen;
  for (auto& s : sections) {
    if (!seen.insert(s.label).second) {
      fail(ErrorKind::DuplicateSection,
           "duplicate section " + std::string(law_id) + " \xC2\xA7 " + s.label);
    }
    auto text = normalize_whitespace(s.body);
    if (text.empty()) {
      fail(ErrorKind::EmptySection,
           "empty section " + std::string(law_id) + " \xC2\xA7 " + s.label);
    }
    out.push_back({std::string(law_id), std::move(s.label), std::move(text), std::nullopt});
  }
  return out;
}

std::string serialize_statute_text(std::span<const ProvisionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out.append(kSectionSign);
    out.push_back(' ');
    out.append(r.section_id);
    out.push_back(' ');
    out.append(r.text);
    out.push_back('\n');
  }
  return out;
}

std::optional<ProvisionFormat> provision_format_from_string(std::string_view s) {
  if (s == "jsonl") return ProvisionFormat::Jsonl;
  if (s == "raw-text" || s == "raw") return ProvisionFormat::RawText;
  return std::nullopt;
}

ProvisionLoad load_provisions(const std::filesystem::path& path, ProvisionFormat format,
                              const LawRegistry& registry, std::string_view law_id) {
  const std::string content = read_file(path);
  ProvisionLoad load;
  if (format == ProvisionFormat::RawText) {
    load.records = parse_statute_text(content, law_id, registry);
    for (auto& r : load.records) r.source_uri = path.filename().string();
    return load;
  }

  std::set<std::pair<std::string, std::string>> seen;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t row = i + 1;
    if (trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      load.errors.push_back({row, ErrorKind::Schema, "invalid JSON"});
      continue;
    }
    if (!j.is_object()) {
      load.errors.push_back({row, ErrorKind::Schema, "row is not an object"});
      continue;
    }
    std::string missing;
    for (const char* key : {"law", "section", "text"}) {
      if (!j.contains(key)) missing += missing.empty() ? key : std::string(", ") + key;
    }
    if (!missing.empty()) {
      load.errors.push_back({row, ErrorKind::Schema, "missing " + missing});
      continue;
    }
    if (!j["law"].is_string() || !j["text"].is_string()) {
      load.errors.push_back({row, ErrorKind::Schema, "law and text must be strings"});
      continue;
    }
    ProvisionRecord rec;
    rec.law_id = j["law"].get<std::string>();
    rec.section_id = json_id_string(j["section"]);
    rec.text = normalize_whitespace(j["text"].get<std::string>());
    if (j.contains("source_uri") && j["source_uri"].is_string()) {
      rec.source_uri = j["source_uri"].get<std::string>();
    }
    if (!registry.contains(rec.law_id)) {
      load.errors.push_back({row, ErrorKind::UnknownLaw, "law code '" + rec.law_id + "' not in registry"});
      continue;
    }
    if (!is_valid_section_label(rec.section_id)) {
      load.errors.push_back({row, ErrorKind::Schema, "invalid section label '" + rec.section_id + "'"});
      continue;
    }
    if (rec.text.empty()) {
      load.errors.push_back({row, ErrorKind::EmptySection, "empty text"});
      continue;
    }
    if (!seen.emplace(rec.law_id, rec.section_id).second) {
      load.errors.push_back({row, ErrorKind::DuplicateSection,
                             "duplicate section " + rec.law_id + " \xC2\xA7 " + rec.section_id});
      continue;
    }
    load.records.push_back(std::move(rec));
  }
  return load;
}

PassageLoad load_passages(const std::filesystem::path& path, std::string_view default_source_tag) {
  const std::string content = read_file(path);
  PassageLoad load;
  std::set<std::pair<std::string, std::int64_t>> seen;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t row = i + 1;
    if (trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      load.errors.push_back({row, ErrorKind::Schema, "invalid JSON"});
      continue;
    }
    if (!j.is_object() || !j.contains("doc") || !j.contains("passage") || !j.contains("text")) {
      load.errors.push_back({row, ErrorKind::Schema, "expected doc, passage and text keys"});
      continue;
    }
    PassageRecord rec;
    rec.doc_id = json_id_string(j["doc"]);
    if (rec.doc_id.empty() || !j["passage"].is_number_integer() || !j["text"].is_string()) {
      load.errors.push_back({row, ErrorKind::Schema, "doc must be a string or integer, passage an integer"});
      continue;
    }
    rec.passage_id = j["passage"].get<std::int64_t>();
    rec.text = normalize_whitespace(j["text"].get<std::string>());
    rec.source_tag = j.contains("source") && j["source"].is_string() ? j["source"].get<std::string>()
                                                                     : std::string(default_source_tag);
    if (rec.text.empty()) {
      load.errors.push_back({row, ErrorKind::Schema, "empty text"});
      continue;
    }
    if (!seen.emplace(rec.doc_id, rec.passage_id).second) {
      fail(ErrorKind::DuplicatePassage, "duplicate passage (doc " + rec.doc_id + ", passage " +
                                            std::to_string(rec.passage_id) + ") at row " +
                                            std::to_string(row));
    }
    load.records.push_back(std::move(rec));
  }
  return load;
}

nlohmann::json to_json(const ProvisionRecord& p) {
  nlohmann::json j{{"law", p.law_id}, {"section", p.section_id}, {"text", p.text}};
  if (p.source_uri) j["source_uri"] = *p.source_uri;
  return j;
}

nlohmann::json to_json(const PassageRecord& p) {
  return {{"doc", p.doc_id}, {"passage", p.passage_id}, {"text", p.text}, {"source", p.source_tag}};
}

ProvisionRecord provision_from_json(const nlohmann::json& j) {
  try {
    ProvisionRecord p{j.at("law").get<std::string>(), j.at("section").get<std::string>(),
                      j.at("text").get<std::string>(), std::nullopt};
    if (j.contains("source_uri")) p.source_uri = j["source_uri"].get<std::string>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad provision record: ") + e.what());
  }
}

PassageRecord passage_from_json(const nlohmann::json& j) {
  try {
    return PassageRecord{j.at("doc").get<std::string>(), j.at("passage").get<std::int64_t>(),
                         j.at("text").get<std::string>(), j.value("source", std::string())};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad passage record: ") + e.what());
  }
}

}  // namespace legal_synth
