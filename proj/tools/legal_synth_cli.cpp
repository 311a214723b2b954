#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "legal_synth/error.hpp"
#include "legal_synth/pipeline.hpp"
#include "legal_synth/run_config.hpp"
#include "legal_synth/text.hpp"

namespace fs = std::filesystem;
using namespace legal_synth;

namespace {

struct Flags {
  std::string config;
  std::string replay;
  std::string record;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool quiet = false;
};

RunConfig build_config(const Flags& f) {
  RunConfig c = load_run_config(f.config);
  // Flags win over the file.
  if (!f.replay.empty()) c.replay = fs::absolute(f.replay);
  if (!f.record.empty()) c.record = fs::absolute(f.record);
  if (f.seed) {
    c.seed = *f.seed;
    c.split_seed = *f.seed;
  }
  if (!f.out.empty()) c.out = fs::absolute(f.out);
  return c;
}

void print_if_exists(const fs::path& p) {
  if (fs::exists(p)) std::cout << read_file(p) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statute-grounded QA synthesis, review, split, export and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "Run config (JSON)")->required();
  app.add_option("--replay", flags.replay, "Replay transcript; no network access");
  app.add_option("--record", flags.record, "Transcript to append live calls to");
  app.add_option("--seed", flags.seed, "Seed for generation, grouping, splitting and option order");
  app.add_option("--out", flags.out, "Output directory");
  app.add_flag("--force", flags.force, "Re-run stages whose inputs are unchanged");
  app.add_flag("-q,--quiet", flags.quiet, "Only print errors");

  std::optional<Stage> stage;
  bool all = false;
  const std::map<Stage, std::string> help = {
      {Stage::Ingest, "Load statute and passage corpora"},
      {Stage::Synth, "Generate candidate QA pairs"},
      {Stage::Review, "Review graded candidates and remove duplicates"},
      {Stage::Split, "Assign units to train/test and propagate to pairs"},
      {Stage::Export, "Write the SFT training JSONL"},
      {Stage::BuildEval, "Build open and multiple-choice eval sets from test units"},
      {Stage::Score, "Answer eval sets with candidate models and score them"},
      {Stage::Report, "Render retention and score tables"},
  };
  for (auto st : all_stages()) {
    auto* sub = app.add_subcommand(std::string(to_string(st)), help.at(st));
    sub->callback([&stage, st] { stage = st; });
  }
  auto* run = app.add_subcommand("run", "Run stages in order");
  run->add_flag("--all", all, "Run every stage")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code_for(ErrorKind::Config);
  }

  try {
    PipelineOptions opts;
    opts.log = flags.quiet ? nullptr : &std::cerr;
    opts.force = flags.force;
    auto config = build_config(flags);
    if (config.replay && config.record && !flags.quiet) {
      std::cerr << "warning: --record is ignored in replay mode\n";
    }
    Pipeline pipeline(std::move(config), opts);
    if (stage) {
      pipeline.run(*stage);
    } else {
      pipeline.run_all();
    }
    if (!flags.quiet && (!stage || *stage == Stage::Report)) {
      print_if_exists(pipeline.out() / "report/retention.txt");
      print_if_exists(pipeline.out() / "report/scores.txt");
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
