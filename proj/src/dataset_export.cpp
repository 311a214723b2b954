#include "legal_synth/dataset_export.hpp"

#include <algorithm>

#include "legal_synth/hashing.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

std::string canonical_json(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string sft_line(const QAPair& pair) {
  auto refs = nlohmann::json::array();
  for (const auto& r : pair.source_refs) refs.push_back(r.canonical());
  nlohmann::json line{
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", kSystemPersona}},
                              {{"role", "user"}, {"content", pair.question}},
                              {{"role", "assistant"}, {"content", pair.answer}}})},
      {"meta",
       {{"qa_id", pair.qa_id}, {"level", to_string(pair.level)}, {"strategy", to_string(pair.strategy)},
        {"source_refs", refs}}}};
  return canonical_json(line);
}

bool sft_order_less(const QAPair& a, const QAPair& b) {
  const UnitKey empty;
  const auto& ka = a.source_refs.empty() ? empty : a.source_refs.front();
  const auto& kb = b.source_refs.empty() ? empty : b.source_refs.front();
  if (unit_key_less(ka, kb)) return true;
  if (unit_key_less(kb, ka)) return false;
  if (a.level != b.level) return a.level < b.level;
  return a.qa_id < b.qa_id;
}

FileEntry describe_file(const std::filesystem::path& path) {
  const auto content = read_file(path);
  return FileEntry{static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n')),
                   sha256_hex(content)};
}

SftExport export_sft(std::span<const QAPair> pairs, const std::filesystem::path& path, const SplitIndex* splits) {
  std::vector<const QAPair*> ordered;
  ordered.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.status != QAStatus::Retained) {
      fail(ErrorKind::Schema, "pair " + p.qa_id + " is " + std::string(to_string(p.status)) + ", not retained");
    }
    if (splits) {
      for (const auto& ref : p.source_refs) {
        if (splits->at(ref) != Split::Train) {
          fail(ErrorKind::Contamination, "pair " + p.qa_id + " references test unit " + ref.canonical());
        }
      }
    }
    ordered.push_back(&p);
  }
  std::sort(ordered.begin(), ordered.end(), [](const QAPair* a, const QAPair* b) { return sft_order_less(*a, *b); });
  std::string out;
  for (const auto* p : ordered) out.append(sft_line(*p)).push_back('\n');
  write_file(path, out);
  return SftExport{describe_file(path), ordered.empty()};
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, e] : m.files) files[name] = {{"lines", e.lines}, {"sha256", e.sha256}};
  return {{"run_id", m.run_id},       {"created_at", m.created_at}, {"seeds", m.seeds},
          {"prompt_hashes", m.prompt_hashes}, {"backends", m.backends}, {"retention", m.retention},
          {"split", m.split},         {"files", files},             {"config", m.config},
          {"details", m.details}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.created_at = j.value("created_at", std::string());
    m.seeds = j.value("seeds", nlohmann::json::object());
    m.prompt_hashes = j.value("prompt_hashes", std::map<std::string, std::string>());
    m.backends = j.value("backends", nlohmann::json::object());
    m.retention = j.value("retention", nlohmann::json::object());
    m.split = j.value("split", nlohmann::json::object());
    for (const auto& [name, e] : j.at("files").items()) {
      m.files[name] = FileEntry{e.at("lines").get<std::size_t>(), e.at("sha256").get<std::string>()};
    }
    m.config = j.value("config", nlohmann::json::object());
    m.details = j.value("details", nlohmann::json::object());
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad manifest: ") + e.what());
  }
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file(path, to_json(manifest).dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Schema, path.string() + " is not valid JSON");
  return manifest_from_json(j);
}

ManifestCheck verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& root) {
  ManifestCheck check;
  for (const auto& [name, expected] : manifest.files) {
    const auto path = root / name;
    if (!std::filesystem::exists(path)) {
      check.problems.push_back(name + ": missing");
      continue;
    }
    const auto actual = describe_file(path);
    if (actual.lines != expected.lines) {
      check.problems.push_back(name + ": " + std::to_string(actual.lines) + " lines, manifest says " +
                               std::to_string(expected.lines));
    }
    if (actual.sha256 != expected.sha256) check.problems.push_back(name + ": content hash mismatch");
  }
  return check;
}

}  // namespace legal_synth
