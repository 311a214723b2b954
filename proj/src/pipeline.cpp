#include "legal_synth/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <set>

#include "legal_synth/dataset_export.hpp"
#include "legal_synth/eval_builder.hpp"
#include "legal_synth/hashing.hpp"
#include "legal_synth/review.hpp"
#include "legal_synth/scorer.hpp"
#include "legal_synth/splitter.hpp"
#include "legal_synth/synthesis.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

namespace fs = std::filesystem;

namespace {

constexpr std::array<Stage, 8> kStages = {Stage::Ingest, Stage::Synth,     Stage::Review, Stage::Split,
                                          Stage::Export, Stage::BuildEval, Stage::Score,  Stage::Report};

constexpr const char* kProvisions = "corpus/provisions.jsonl";
constexpr const char* kPassages = "corpus/passages.jsonl";
constexpr const char* kRowErrors = "corpus/row_errors.jsonl";
constexpr const char* kCandidates = "synth/candidates.jsonl";
constexpr const char* kSynthFailures = "synth/failures.jsonl";
constexpr const char* kSynthWarnings = "synth/warnings.jsonl";
constexpr const char* kL4Groups = "synth/l4_groups.json";
constexpr const char* kVerdicts = "review/verdicts.jsonl";
constexpr const char* kReviewFailures = "review/failures.jsonl";
constexpr const char* kReviewWarnings = "review/warnings.jsonl";
constexpr const char* kDuplicates = "review/duplicates.jsonl";
constexpr const char* kReviewedPairs = "review/pairs.jsonl";
constexpr const char* kRetention = "review/retention.json";
constexpr const char* kSplitManifest = "split/split_manifest.json";
constexpr const char* kTrainPairs = "split/train_pairs.jsonl";
constexpr const char* kTestPairs = "split/test_pairs.jsonl";
constexpr const char* kQuarantine = "split/quarantine_pairs.jsonl";
constexpr const char* kContamination = "split/contamination.json";
constexpr const char* kSftTrain = "export/sft_train.jsonl";
constexpr const char* kEvalIndex = "eval/index.json";
constexpr const char* kScoreIndex = "score/index.json";
constexpr const char* kRetentionTable = "report/retention.txt";
constexpr const char* kScoreTable = "report/scores.txt";
constexpr const char* kDeltas = "report/deltas.json";

template <class Range, class Fn>
std::string jsonl(const Range& items, Fn&& to) {
  std::string out;
  for (const auto& it : items) {
    out.append(canonical_json(to(it)));
    out.push_back('\n');
  }
  return out;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> rows;
  std::size_t n = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Schema, path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Schema, path.string() + ": " + e.what());
  }
}

std::vector<ProvisionRecord> read_provisions(const fs::path& path) {
  std::vector<ProvisionRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(provision_from_json(j));
  return out;
}

std::vector<PassageRecord> read_passages(const fs::path& path) {
  std::vector<PassageRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(passage_from_json(j));
  return out;
}

std::vector<QAPair> read_pairs(const fs::path& path) {
  std::vector<QAPair> out;
  for (const auto& j : read_jsonl(path)) out.push_back(qa_pair_from_json(j));
  return out;
}

std::vector<EvalItem> read_eval_items(const fs::path& path) {
  std::vector<EvalItem> out;
  for (const auto& j : read_jsonl(path)) out.push_back(eval_item_from_json(j));
  return out;
}

nlohmann::json id(const nlohmann::json& j) { return j; }

nlohmann::json failure_json(const FailureRecord& f) { return to_json(f); }

nlohmann::json warning_json(const std::string& w) { return nlohmann::json{{"warning", w}}; }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_hash(const fs::path& p) { return sha256_hex(read_file(p)); }

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Synth: return "synth";
    case Stage::Review: return "review";
    case Stage::Split: return "split";
    case Stage::Export: return "export";
    case Stage::BuildEval: return "build-eval";
    case Stage::Score: return "score";
    case Stage::Report: return "report";
  }
  return "?";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  for (auto st : kStages) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

const std::array<Stage, 8>& all_stages() { return kStages; }

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingArtifact: return 2;
    case ErrorKind::Config: return 3;
    case ErrorKind::ReplayMiss:
    case ErrorKind::BackendExhausted:
    case ErrorKind::Auth:
    case ErrorKind::Protocol:
    case ErrorKind::AllTasksFailed: return 4;
    case ErrorKind::Io:
    case ErrorKind::Schema:
    case ErrorKind::NoSectionsFound:
    case ErrorKind::DuplicateSection:
    case ErrorKind::DuplicatePassage:
    case ErrorKind::UnknownLaw:
    case ErrorKind::EmptySection:
    case ErrorKind::UnknownQaId:
    case ErrorKind::DuplicateUnit:
    case ErrorKind::MissingAssignment:
    case ErrorKind::Contamination:
    case ErrorKind::SetMismatch: return 5;
    default: return 1;
  }
}

std::string model_file_stem(std::string_view model_name) {
  std::string s;
  for (char c : model_name) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '-' || c == '_';
    s.push_back(keep ? c : '_');
  }
  if (s.empty() || s.front() == '.') s.insert(s.begin(), '_');
  return s;
}

class Pipeline::Backends {
 public:
  Backends(const RunConfig& config, const PipelineOptions& options) {
    if (config.replay) {
      replay_ = std::make_shared<const Transcript>(Transcript::load(*config.replay));
      return;
    }
    key_ = options.api_key.value_or("");
    if (!options.api_key) {
      if (const char* env = std::getenv(std::string(kApiKeyEnv).c_str())) key_ = env;
    }
    if (key_.empty()) {
      fail(ErrorKind::Config, std::string(kApiKeyEnv) + " is not set and no replay transcript was given");
    }
    record_ = Transcript::open_for_append(config.record.value_or(config.out / "transcript.jsonl"));
    transport_ = options.transport;
    if (!transport_) {
      owned_transport_ = make_http_transport();
      transport_ = owned_transport_.get();
    }
    clock_ = options.clock ? options.clock : &system_clock_;
  }

  Gateway make(const BackendConfig& b) {
    if (replay_) return Gateway::replay(b, replay_);
    Gateway::LiveOptions live;
    live.transport = transport_;
    live.clock = clock_;
    live.api_key = key_;
    return Gateway(b, record_, live);
  }

 private:
  std::shared_ptr<const Transcript> replay_;
  std::shared_ptr<Transcript> record_;
  std::unique_ptr<HttpTransport> owned_transport_;
  HttpTransport* transport_ = nullptr;
  SystemClock system_clock_;
  Clock* clock_ = nullptr;
  std::string key_;
};

Pipeline::Pipeline(RunConfig config, PipelineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (config_.replay && !fs::exists(*config_.replay)) {
    fail(ErrorKind::Config, "replay transcript not found: " + config_.replay->string());
  }
  templates_ = config_.templates_dir ? TemplateSet::load_dir(*config_.templates_dir) : TemplateSet::builtin();
}

Pipeline::~Pipeline() = default;

Pipeline::Backends& Pipeline::backends() {
  if (!backends_) backends_ = std::make_unique<Backends>(config_, options_);
  return *backends_;
}

void Pipeline::log(const std::string& line) const {
  if (options_.log) *options_.log << line << '\n';
}

void Pipeline::require(const fs::path& rel, Stage producer) const {
  if (!fs::exists(config_.out / rel)) {
    fail(ErrorKind::MissingArtifact,
         rel.generic_string() + " not found in " + config_.out.string() + "; run `" + std::string(to_string(producer)) +
             "` first");
  }
}

std::string Pipeline::input_hash(Stage stage, const std::vector<std::string>& inputs,
                                 const nlohmann::json& params) const {
  nlohmann::json j{{"stage", to_string(stage)}, {"params", params}, {"templates", templates_.hashes()}};
  auto files = nlohmann::json::object();
  for (const auto& rel : inputs) files[rel] = file_hash(config_.out / rel);
  j["inputs"] = files;
  return sha256_hex(canonical_json(j));
}

bool Pipeline::up_to_date(Stage stage, const std::string& hash) const {
  if (options_.force) return false;
  const auto rec = config_.out / "stages" / (std::string(to_string(stage)) + ".json");
  if (!fs::exists(rec)) return false;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(rec));
  } catch (const nlohmann::json::parse_error&) {
    return false;
  }
  if (j.value("input_hash", std::string()) != hash) return false;
  const auto outputs = j.value("outputs", nlohmann::json::object());
  for (const auto& [rel, e] : outputs.items()) {
    const auto p = config_.out / rel;
    if (!fs::exists(p)) return false;
    if (describe_file(p).sha256 != e.value("sha256", std::string())) return false;
  }
  return true;
}

void Pipeline::record_stage(Stage stage, const std::string& hash, const std::vector<std::string>& outputs) const {
  auto files = nlohmann::json::object();
  for (const auto& rel : outputs) {
    const auto e = describe_file(config_.out / rel);
    files[rel] = {{"lines", e.lines}, {"sha256", e.sha256}};
  }
  write_file(config_.out / "stages" / (std::string(to_string(stage)) + ".json"),
             nlohmann::json{{"stage", to_string(stage)}, {"input_hash", hash}, {"outputs", files}}.dump(2) + "\n");
}

void Pipeline::refresh_manifest() const {
  const auto path = config_.out / "manifest.json";
  DatasetManifest m;
  auto config_json = to_json(config_);
  // The manifest lives in the output directory, so its path adds nothing.
  config_json.erase("out");
  if (fs::exists(path)) {
    const auto old = read_manifest(path);
    m.run_id = old.run_id;
    m.created_at = old.created_at;
  } else {
    m.created_at = utc_now();
    m.run_id = sha256_hex(canonical_json(config_json) + m.created_at).substr(0, 12);
  }
  m.config = config_json;
  m.seeds = {{"seed", config_.seed}, {"split_seed", config_.effective_split_seed()}};
  m.prompt_hashes = templates_.hashes();
  auto candidates = nlohmann::json::array();
  for (const auto& c : config_.candidates) candidates.push_back(to_json(c));
  m.backends = {{"mode", config_.replay ? "replay" : "live"},
                {"generator", to_json(config_.generator)},
                {"reviewer", to_json(config_.reviewer)},
                {"judge", to_json(config_.judge)},
                {"candidates", candidates}};

  auto stages = nlohmann::json::object();
  for (auto st : kStages) {
    const auto rec = config_.out / "stages" / (std::string(to_string(st)) + ".json");
    if (!fs::exists(rec)) continue;
    const auto j = read_json(rec);
    stages[std::string(to_string(st))] = j.at("input_hash");
    for (const auto& [rel, e] : j.at("outputs").items()) {
      m.files[rel] = FileEntry{e.at("lines").get<std::size_t>(), e.at("sha256").get<std::string>()};
    }
  }
  m.details["stages"] = stages;
  if (fs::exists(config_.out / kRetention)) m.retention = read_json(config_.out / kRetention);
  if (fs::exists(config_.out / kSplitManifest)) {
    auto split = read_json(config_.out / kSplitManifest);
    std::size_t train = 0, test = 0;
    for (const auto& [_, v] : split.at("assignments").items()) (v == "test" ? test : train) += 1;
    split["train_units"] = train;
    split["test_units"] = test;
    m.split = split;
  }
  if (fs::exists(config_.out / kL4Groups)) m.details["l4_groups"] = read_json(config_.out / kL4Groups);
  if (fs::exists(config_.out / kEvalIndex)) m.details["eval_sets"] = read_json(config_.out / kEvalIndex).at("sets");
  if (fs::exists(config_.out / kScoreIndex)) {
    auto scores = nlohmann::json::array();
    const auto index = read_json(config_.out / kScoreIndex);
    for (const auto& e : index.at("models")) {
      scores.push_back(read_json(config_.out / e.at("file").get<std::string>()));
    }
    m.details["scores"] = scores;
  }
  write_manifest(m, path);
}

StageResult Pipeline::run(Stage stage) {
  StageResult r;
  switch (stage) {
    case Stage::Ingest: r = ingest(); break;
    case Stage::Synth: r = synth(); break;
    case Stage::Review: r = review(); break;
    case Stage::Split: r = split(); break;
    case Stage::Export: r = export_stage(); break;
    case Stage::BuildEval: r = build_eval(); break;
    case Stage::Score: r = score(); break;
    case Stage::Report: r = report(); break;
  }
  r.stage = stage;
  refresh_manifest();
  for (const auto& w : r.warnings) log("[" + std::string(to_string(stage)) + "] warning: " + w);
  log("[" + std::string(to_string(stage)) + "] " + (r.skipped ? "up to date, skipped" : r.summary));
  return r;
}

std::vector<StageResult> Pipeline::run_all() {
  std::vector<StageResult> out;
  for (auto st : kStages) out.push_back(run(st));
  return out;
}

namespace {

nlohmann::json backend_fingerprint(const RunConfig& c) {
  if (c.replay) return {{"replay", file_hash(*c.replay)}};
  return {{"live", true}};
}

}  // namespace

StageResult Pipeline::ingest() {
  auto sources = nlohmann::json::array();
  for (const auto& s : config_.corpus) {
    if (!fs::exists(s.path)) fail(ErrorKind::Config, "corpus file not found: " + s.path.string());
    sources.push_back({{"sha256", file_hash(s.path)},
                       {"format", s.format == ProvisionFormat::Jsonl ? "jsonl" : "raw"},
                       {"law", s.law}});
  }
  auto passages = nlohmann::json::array();
  for (const auto& p : config_.passages) {
    if (!fs::exists(p)) fail(ErrorKind::Config, "passage file not found: " + p.string());
    passages.push_back(file_hash(p));
  }
  const std::vector<std::string> outputs = {kProvisions, kPassages, kRowErrors};
  const auto hash = input_hash(Stage::Ingest, {}, {{"corpus", sources}, {"passages", passages}, {"laws", config_.laws}});
  StageResult r;
  if (up_to_date(Stage::Ingest, hash)) {
    r.skipped = true;
    return r;
  }

  const auto registry = config_.registry();
  std::vector<ProvisionRecord> provisions;
  std::vector<nlohmann::json> row_errors;
  std::set<UnitKey> seen;
  for (const auto& s : config_.corpus) {
    auto load = load_provisions(s.path, s.format, registry, s.law);
    for (const auto& e : load.errors) {
      row_errors.push_back({{"file", s.path.filename().string()},
                            {"row", e.row},
                            {"kind", to_string(e.kind)},
                            {"message", e.message}});
    }
    for (auto& p : load.records) {
      if (!seen.insert(unit_key(p)).second) {
        fail(ErrorKind::DuplicateSection, unit_key(p).display() + " appears in more than one corpus file");
      }
      provisions.push_back(std::move(p));
    }
  }
  if (provisions.empty()) fail(ErrorKind::NoSectionsFound, "the corpus holds no provisions");
  std::stable_sort(provisions.begin(), provisions.end(),
                   [](const auto& a, const auto& b) { return unit_key_less(unit_key(a), unit_key(b)); });

  std::vector<PassageRecord> passage_records;
  for (const auto& p : config_.passages) {
    auto load = load_passages(p);
    for (const auto& e : load.errors) {
      row_errors.push_back({{"file", p.filename().string()},
                            {"row", e.row},
                            {"kind", to_string(e.kind)},
                            {"message", e.message}});
    }
    for (auto& rec : load.records) {
      if (!seen.insert(unit_key(rec)).second) {
        fail(ErrorKind::DuplicatePassage, unit_key(rec).display() + " appears in more than one passage file");
      }
      passage_records.push_back(std::move(rec));
    }
  }
  std::stable_sort(passage_records.begin(), passage_records.end(),
                   [](const auto& a, const auto& b) { return unit_key_less(unit_key(a), unit_key(b)); });

  write_file(config_.out / kProvisions, jsonl(provisions, [](const auto& p) { return to_json(p); }));
  write_file(config_.out / kPassages, jsonl(passage_records, [](const auto& p) { return to_json(p); }));
  write_file(config_.out / kRowErrors, jsonl(row_errors, id));
  record_stage(Stage::Ingest, hash, outputs);
  for (const auto& e : row_errors) r.warnings.push_back(e.at("file").get<std::string>() + " row " + e.at("row").dump() + ": " + e.at("message").get<std::string>());
  r.outputs = outputs;
  r.summary = std::to_string(provisions.size()) + " provisions, " + std::to_string(passage_records.size()) +
              " passages, " + std::to_string(row_errors.size()) + " rejected rows";
  return r;
}

StageResult Pipeline::synth() {
  require(kProvisions, Stage::Ingest);
  nlohmann::json params{{"strategy", to_string(config_.strategy)},
                        {"levels", config_.levels},
                        {"standard_cap", config_.standard_cap},
                        {"l4", {config_.l4_group_size, config_.l4_groups_per_law, config_.l4_cross_law}},
                        {"seed", config_.seed},
                        {"generator", to_json(config_.generator)},
                        {"backend", backend_fingerprint(config_)}};
  const std::vector<std::string> outputs = {kCandidates, kSynthFailures, kSynthWarnings, kL4Groups};
  const auto hash = input_hash(Stage::Synth, {kProvisions}, params);
  StageResult r;
  if (up_to_date(Stage::Synth, hash)) {
    r.skipped = true;
    return r;
  }
  const auto provisions = read_provisions(config_.out / kProvisions);
  auto gateway = backends().make(config_.generator);
  const auto sc = config_.synthesis_config(templates_);
  SynthesisResult all;
  auto absorb = [&all](SynthesisResult&& part) {
    for (auto& c : part.candidates) all.candidates.push_back(std::move(c));
    for (auto& f : part.failures) all.failures.push_back(std::move(f));
    for (auto& w : part.warnings) all.warnings.push_back(std::move(w));
    for (auto& g : part.l4_groups) all.l4_groups.push_back(std::move(g));
    all.tasks += part.tasks;
  };
  if (config_.strategy != StrategyChoice::Graded) absorb(synthesize_standard(provisions, gateway, sc));
  if (config_.strategy != StrategyChoice::Standard) absorb(synthesize_graded(provisions, gateway, sc));
  assign_qa_ids(all.candidates);

  auto groups = nlohmann::json::array();
  for (const auto& g : all.l4_groups) {
    auto members = nlohmann::json::array();
    for (const auto& k : g.members) members.push_back(k.canonical());
    groups.push_back(members);
  }
  write_file(config_.out / kCandidates, jsonl(all.candidates, [](const QAPair& p) { return to_json(p); }));
  write_file(config_.out / kSynthFailures, jsonl(all.failures, failure_json));
  write_file(config_.out / kSynthWarnings, jsonl(all.warnings, warning_json));
  write_file(config_.out / kL4Groups, groups.dump(2) + "\n");
  record_stage(Stage::Synth, hash, outputs);
  r.outputs = outputs;
  r.warnings = all.warnings;
  for (const auto& f : all.failures) r.warnings.push_back(f.task_key + " failed: " + f.error_kind + " " + f.detail);
  r.summary = std::to_string(all.candidates.size()) + " candidates from " + std::to_string(all.tasks) + " tasks, " +
              std::to_string(all.failures.size()) + " failed";
  return r;
}

StageResult Pipeline::review() {
  require(kCandidates, Stage::Synth);
  require(kProvisions, Stage::Ingest);
  nlohmann::json params{{"dedup", {config_.dedup_threshold, config_.shingle_size}},
                        {"reviewer", to_json(config_.reviewer)},
                        {"backend", backend_fingerprint(config_)}};
  const std::vector<std::string> outputs = {kVerdicts,      kReviewFailures, kReviewWarnings,
                                            kDuplicates,    kReviewedPairs,  kRetention};
  const auto hash = input_hash(Stage::Review, {kCandidates, kProvisions}, params);
  StageResult r;
  if (up_to_date(Stage::Review, hash)) {
    r.skipped = true;
    return r;
  }
  const auto provisions = read_provisions(config_.out / kProvisions);
  auto pairs = read_pairs(config_.out / kCandidates);
  for (const auto& p : pairs) {
    if (p.status != QAStatus::Candidate) fail(ErrorKind::Schema, p.qa_id + " is not a fresh candidate");
  }
  accept_unreviewed(pairs);
  ReviewOutcome outcome;
  const bool any_graded =
      std::any_of(pairs.begin(), pairs.end(), [](const QAPair& p) { return p.status == QAStatus::Candidate; });
  if (any_graded) {
    auto gateway = backends().make(config_.reviewer);
    outcome = review_candidates(pairs, provisions, gateway, templates_);
  }
  apply_verdicts(pairs, outcome.verdicts);
  const auto dups = deduplicate(pairs, config_.dedup_config());
  const auto stats = compute_retention(pairs);

  write_file(config_.out / kVerdicts, jsonl(outcome.verdicts, [](const ReviewVerdict& v) { return to_json(v); }));
  write_file(config_.out / kReviewFailures, jsonl(outcome.failures, failure_json));
  write_file(config_.out / kReviewWarnings, jsonl(outcome.warnings, warning_json));
  write_file(config_.out / kDuplicates, jsonl(dups, [](const DuplicateRecord& d) { return to_json(d); }));
  write_file(config_.out / kReviewedPairs, jsonl(pairs, [](const QAPair& p) { return to_json(p); }));
  write_file(config_.out / kRetention, to_json(stats).dump(2) + "\n");
  record_stage(Stage::Review, hash, outputs);
  r.outputs = outputs;
  r.warnings = outcome.warnings;
  for (const auto& f : outcome.failures) r.warnings.push_back(f.task_key + " failed: " + f.error_kind + " " + f.detail);
  const auto total = stats.total();
  r.summary = std::to_string(total.candidates_before) + " candidates, " + std::to_string(total.rejected_by_review) +
              " rejected, " + std::to_string(total.duplicates) + " duplicates, " +
              std::to_string(total.retained_after) + " retained (" + std::to_string(outcome.batches) +
              " reviewer calls)";
  return r;
}

StageResult Pipeline::split() {
  require(kReviewedPairs, Stage::Review);
  require(kProvisions, Stage::Ingest);
  require(kPassages, Stage::Ingest);
  nlohmann::json params{{"seed", config_.effective_split_seed()}, {"test_ratio", config_.test_ratio}};
  const std::vector<std::string> outputs = {kSplitManifest, kTrainPairs, kTestPairs, kQuarantine, kContamination};
  const auto hash = input_hash(Stage::Split, {kReviewedPairs, kProvisions, kPassages}, params);
  StageResult r;
  if (up_to_date(Stage::Split, hash)) {
    r.skipped = true;
    return r;
  }
  std::vector<UnitKey> units;
  for (const auto& p : read_provisions(config_.out / kProvisions)) units.push_back(unit_key(p));
  for (const auto& p : read_passages(config_.out / kPassages)) units.push_back(unit_key(p));
  const auto assignments = assign_splits(units, config_.effective_split_seed(), config_.test_ratio);
  const SplitIndex index(assignments);

  std::vector<QAPair> retained;
  for (auto& p : read_pairs(config_.out / kReviewedPairs)) {
    if (p.status == QAStatus::Retained) retained.push_back(std::move(p));
  }
  const auto parts = propagate_split(retained, index);
  const auto report = verify_no_contamination(parts.train, index.units(Split::Test));
  write_file(config_.out / kContamination, to_json(report).dump(2) + "\n");
  if (!report.clean()) {
    fail(ErrorKind::Contamination,
         std::to_string(report.violations.size()) + " train pairs reference test units; see " + kContamination);
  }
  auto to = [](const QAPair& p) { return to_json(p); };
  write_file(config_.out / kSplitManifest, split_manifest_json(index).dump(2) + "\n");
  write_file(config_.out / kTrainPairs, jsonl(parts.train, to));
  write_file(config_.out / kTestPairs, jsonl(parts.test, to));
  write_file(config_.out / kQuarantine, jsonl(parts.quarantine, to));
  record_stage(Stage::Split, hash, outputs);
  r.outputs = outputs;
  r.summary = std::to_string(index.units(Split::Train).size()) + " train units, " +
              std::to_string(index.units(Split::Test).size()) + " test units; pairs " +
              std::to_string(parts.train.size()) + " train, " + std::to_string(parts.test.size()) + " test, " +
              std::to_string(parts.quarantine.size()) + " quarantined";
  return r;
}

StageResult Pipeline::export_stage() {
  require(kTrainPairs, Stage::Split);
  require(kSplitManifest, Stage::Split);
  const std::vector<std::string> outputs = {kSftTrain};
  const auto hash = input_hash(Stage::Export, {kTrainPairs, kSplitManifest}, nlohmann::json::object());
  StageResult r;
  if (up_to_date(Stage::Export, hash)) {
    r.skipped = true;
    return r;
  }
  const auto index = split_index_from_json(read_json(config_.out / kSplitManifest));
  const auto train = read_pairs(config_.out / kTrainPairs);
  const auto sft = export_sft(train, config_.out / kSftTrain, &index);
  record_stage(Stage::Export, hash, outputs);
  r.outputs = outputs;
  if (sft.empty) r.warnings.push_back("EmptyDataset: no retained train pairs to export");
  r.summary = std::to_string(sft.entry.lines) + " SFT examples, sha256 " + sft.entry.sha256.substr(0, 12);
  return r;
}

StageResult Pipeline::build_eval() {
  require(kSplitManifest, Stage::Split);
  require(kProvisions, Stage::Ingest);
  require(kPassages, Stage::Ingest);
  auto sets = nlohmann::json::array();
  for (const auto& s : config_.eval_sets) {
    sets.push_back({s.name, to_string(s.kind), s.source_kind == UnitKind::Statute ? "statute" : "passage",
                    s.law_filter.value_or(""), s.target_n});
  }
  nlohmann::json params{{"sets", sets},
                        {"seed", config_.seed},
                        {"generator", to_json(config_.generator)},
                        {"backend", backend_fingerprint(config_)}};
  std::vector<std::string> outputs;
  for (const auto& s : config_.eval_sets) {
    outputs.push_back("eval/" + s.name + ".jsonl");
    outputs.push_back("eval/" + s.name + ".dropped.jsonl");
  }
  outputs.push_back(kEvalIndex);
  const auto hash = input_hash(Stage::BuildEval, {kSplitManifest, kProvisions, kPassages}, params);
  StageResult r;
  if (up_to_date(Stage::BuildEval, hash)) {
    r.skipped = true;
    return r;
  }
  const auto index = split_index_from_json(read_json(config_.out / kSplitManifest));
  const auto provisions = read_provisions(config_.out / kProvisions);
  const auto passages = read_passages(config_.out / kPassages);
  std::optional<Gateway> gateway;
  auto index_json = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& spec : config_.eval_sets) {
    const auto sources = select_eval_sources(spec, provisions, passages, index, config_.seed);
    EvalBuild build;
    if (!sources.empty()) {
      if (!gateway) gateway.emplace(backends().make(config_.generator));
      build = spec.kind == EvalKind::Open ? build_open_set(spec.name, sources, *gateway, index, templates_)
                                          : build_mcq_set(spec.name, sources, *gateway, index, config_.seed, templates_);
    }
    write_file(config_.out / ("eval/" + spec.name + ".jsonl"),
               jsonl(build.items, [](const EvalItem& i) { return to_json(i); }));
    write_file(config_.out / ("eval/" + spec.name + ".dropped.jsonl"), jsonl(build.dropped, failure_json));
    if (build.items.size() < spec.target_n) {
      r.warnings.push_back(spec.name + ": " + std::to_string(build.items.size()) + " items, target " +
                           std::to_string(spec.target_n));
    }
    index_json.push_back({{"name", spec.name},
                          {"kind", to_string(spec.kind)},
                          {"file", "eval/" + spec.name + ".jsonl"},
                          {"n", build.items.size()},
                          {"dropped", build.dropped.size()},
                          {"target_n", spec.target_n}});
    total += build.items.size();
  }
  write_file(config_.out / kEvalIndex, nlohmann::json{{"sets", index_json}}.dump(2) + "\n");
  record_stage(Stage::BuildEval, hash, outputs);
  r.outputs = outputs;
  r.summary = std::to_string(total) + " eval items in " + std::to_string(config_.eval_sets.size()) + " sets";
  return r;
}

StageResult Pipeline::score() {
  require(kEvalIndex, Stage::BuildEval);
  if (config_.candidates.empty()) fail(ErrorKind::Config, "no candidate backends configured for scoring");
  const auto eval_index = read_json(config_.out / kEvalIndex).at("sets");
  std::vector<std::string> inputs = {kEvalIndex};
  for (const auto& s : eval_index) inputs.push_back(s.at("file").get<std::string>());
  auto cands = nlohmann::json::array();
  for (const auto& c : config_.candidates) cands.push_back(to_json(c));
  nlohmann::json params{
      {"candidates", cands}, {"judge", to_json(config_.judge)}, {"backend", backend_fingerprint(config_)}};
  std::vector<std::string> outputs;
  for (const auto& c : config_.candidates) {
    const auto stem = model_file_stem(c.model_name);
    outputs.push_back("score/" + stem + ".json");
    for (const auto& s : eval_index) {
      const auto name = s.at("name").get<std::string>();
      outputs.push_back("score/" + stem + "/" + name + ".answers.jsonl");
      if (s.at("kind") == "open") outputs.push_back("score/" + stem + "/" + name + ".judgments.jsonl");
    }
  }
  outputs.push_back(kScoreIndex);
  const auto hash = input_hash(Stage::Score, inputs, params);
  StageResult r;
  if (up_to_date(Stage::Score, hash)) {
    r.skipped = true;
    return r;
  }
  std::map<std::string, std::vector<EvalItem>> items;
  for (const auto& s : eval_index) {
    items[s.at("name").get<std::string>()] = read_eval_items(config_.out / s.at("file").get<std::string>());
  }
  std::optional<Gateway> judge;
  auto models = nlohmann::json::array();
  std::vector<std::string> lines;
  for (const auto& c : config_.candidates) {
    const auto stem = model_file_stem(c.model_name);
    auto candidate = backends().make(c);
    ScoreReport report{c.model_name, {}};
    for (const auto& s : eval_index) {
      const auto name = s.at("name").get<std::string>();
      const auto& set = items.at(name);
      const auto answers = run_candidate(set, candidate, templates_);
      std::size_t unextractable = 0;
      for (const auto& a : answers) unextractable += !a.extractable();
      if (unextractable) {
        r.warnings.push_back(c.model_name + " " + name + ": " + std::to_string(unextractable) + " unextractable");
      }
      write_file(config_.out / ("score/" + stem + "/" + name + ".answers.jsonl"),
                 jsonl(answers, [](const ModelAnswer& a) { return to_json(a); }));
      if (s.at("kind") == "open") {
        if (!judge) judge.emplace(backends().make(config_.judge));
        const auto judged = judge_open(name, answers, set, *judge, templates_);
        write_file(config_.out / ("score/" + stem + "/" + name + ".judgments.jsonl"),
                   jsonl(judged.judgments, [](const JudgedItem& j) { return to_json(j); }));
        report.sets[name] = judged.entry;
      } else {
        report.sets[name] = score_mcq(name, answers, set);
      }
      const auto& e = report.sets[name];
      lines.push_back(c.model_name + " " + name + " " + format_tenths(e.accuracy_tenths()) + " (" +
                      std::to_string(e.correct) + "/" + std::to_string(e.n) + ")");
    }
    write_file(config_.out / ("score/" + stem + ".json"), to_json(report).dump(2) + "\n");
    models.push_back({{"model", c.model_name}, {"file", "score/" + stem + ".json"}});
  }
  write_file(config_.out / kScoreIndex, nlohmann::json{{"models", models}}.dump(2) + "\n");
  record_stage(Stage::Score, hash, outputs);
  r.outputs = outputs;
  r.summary = "scored " + std::to_string(config_.candidates.size()) + " models";
  for (const auto& l : lines) r.summary += "\n  " + l;
  return r;
}

StageResult Pipeline::report() {
  require(kRetention, Stage::Review);
  std::vector<std::string> inputs = {kRetention};
  const bool scored = fs::exists(config_.out / kScoreIndex);
  nlohmann::json score_index;
  if (scored) {
    inputs.push_back(kScoreIndex);
    score_index = read_json(config_.out / kScoreIndex).at("models");
    for (const auto& e : score_index) inputs.push_back(e.at("file").get<std::string>());
  }
  std::vector<std::string> outputs = {kRetentionTable};
  if (scored) {
    outputs.push_back(kScoreTable);
    outputs.push_back(kDeltas);
  }
  const auto hash = input_hash(Stage::Report, inputs, nlohmann::json::object());
  StageResult r;
  if (up_to_date(Stage::Report, hash)) {
    r.skipped = true;
    r.outputs = outputs;
    return r;
  }
  const auto stats = retention_from_json(read_json(config_.out / kRetention));
  write_file(config_.out / kRetentionTable, render_retention_table(stats));
  if (scored) {
    std::vector<ScoreReport> reports;
    for (const auto& e : score_index) {
      reports.push_back(score_report_from_json(read_json(config_.out / e.at("file").get<std::string>())));
    }
    if (reports.empty()) fail(ErrorKind::MissingArtifact, "score index lists no models");
    const std::span<const ScoreReport> adapted(reports.data() + 1, reports.size() - 1);
    write_file(config_.out / kScoreTable, render_score_table(reports.front(), adapted));
    auto deltas = nlohmann::json::array();
    for (const auto& a : adapted) deltas.push_back(to_json(compare(reports.front(), a)));
    write_file(config_.out / kDeltas, deltas.dump(2) + "\n");
  }
  record_stage(Stage::Report, hash, outputs);
  r.outputs = outputs;
  r.summary = "wrote " + std::to_string(outputs.size()) + " report files";
  return r;
}

}  // namespace legal_synth
