#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "legal_synth/qa_pair.hpp"
#include "legal_synth/splitter.hpp"

namespace legal_synth {

inline constexpr std::string_view kSystemPersona =
    "You are a qualified German lawyer. Answer questions on German law strictly on the basis of the "
    "statutory text and always cite the law code and the section (\xC2\xA7).";

// Compact JSON, sorted keys, UTF-8 kept as is.
std::string canonical_json(const nlohmann::json& j);

std::string sft_line(const QAPair& pair);

// Export order: first source (natural order), level, qa_id.
bool sft_order_less(const QAPair& a, const QAPair& b);

struct FileEntry {
  std::size_t lines = 0;
  std::string sha256;

  bool operator==(const FileEntry&) const = default;
};

FileEntry describe_file(const std::filesystem::path& path);

struct SftExport {
  FileEntry entry;
  bool empty = false;  // EmptyDataset warning, not an error
};

// Every pair must be Retained (SchemaError otherwise) and, when `splits` is
// given, have only train sources (ContaminationError otherwise).
SftExport export_sft(std::span<const QAPair> pairs, const std::filesystem::path& path,
                     const SplitIndex* splits = nullptr);

// Provenance ledger for one output tree. File paths are relative to the
// tree root.
struct DatasetManifest {
  std::string run_id;
  std::string created_at;
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> prompt_hashes;
  nlohmann::json backends = nlohmann::json::object();
  nlohmann::json retention = nlohmann::json::object();
  nlohmann::json split = nlohmann::json::object();
  std::map<std::string, FileEntry> files;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct ManifestCheck {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

// Re-reads every listed file under root and compares line count and hash.
ManifestCheck verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& root);

}  // namespace legal_synth
