#include "cli.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <memory>

#include "legal_synth/text.hpp"
#include "temp_dir.hpp"

namespace legal_synth::testing {

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

CliResult run_program(const std::string& program, const std::vector<std::string>& args) {
  std::string cmd = quote(program);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>&1";
  CliResult r;
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const auto n = std::fread(buf.data(), 1, buf.size(), pipe.get())) r.output.append(buf.data(), n);
  const int status = pclose(pipe.release());
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

CliResult run_cli(const std::vector<std::string>& args) { return run_program(LEGAL_SYNTH_CLI, args); }

nlohmann::json fixture_config() {
  const auto dir = fixture_dir();
  auto j = nlohmann::json::parse(read_file(dir / "run_config.json"), nullptr, true, true);
  for (auto& c : j["corpus"]) c["path"] = (dir / c["path"].get<std::string>()).string();
  for (auto& p : j["passages"]) p = (dir / p.get<std::string>()).string();
  j["replay"] = (dir / j["replay"].get<std::string>()).string();
  j.erase("out");
  return j;
}

std::filesystem::path write_config(const std::filesystem::path& dir, const nlohmann::json& config) {
  const auto path = dir / "run_config.json";
  write_file(path, config.dump(2));
  return path;
}

std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), root).generic_string();
    auto content = read_file(e.path());
    if (rel == "manifest.json") {
      auto j = nlohmann::json::parse(content);
      j.erase("run_id");
      j.erase("created_at");
      content = j.dump(2);
    }
    out[rel] = std::move(content);
  }
  return out;
}

}  // namespace legal_synth::testing
