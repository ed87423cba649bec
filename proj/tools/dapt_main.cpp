#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dapt/config.hpp"
#include "dapt/pipeline.hpp"
#include "dapt/preprocess.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config file");
  cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--set", opts.overrides, "override, section.key=value")->take_all();
  cmd->add_option("--seed", opts.seed, "override the stage seed");
}

dapt::RawConfig resolve_config(const std::string& command, const CommonOpts& opts) {
  dapt::RawConfig cfg = dapt::default_config();
  if (!opts.config_path.empty()) {
    dapt::RawConfig file = dapt::RawConfig::parse_file(opts.config_path);
    for (const std::string& section : file.sections())
      for (const auto& [k, v] : file.section_items(section)) cfg.set(section, k, v);
  }
  for (const std::string& ov : opts.overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos) throw dapt::ConfigError("--set needs section.key=value, got '" + ov + "'");
    cfg.set_dotted(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (opts.seed >= 0) {
    if (command == "build-corpus") cfg.set("corpus", "split_seed", std::to_string(opts.seed));
    if (command == "pretrain") cfg.set("pretrain", "seed", std::to_string(opts.seed));
    if (command == "finetune") cfg.set("finetune", "seeds", std::to_string(opts.seed));
  }
  return cfg;
}

int run_pipeline_command(const std::string& command, const CommonOpts& opts) {
  dapt::RawConfig cfg = resolve_config(command, opts);
  dapt::RunManifest manifest = dapt::run_with_manifest(command, cfg, opts.out_dir);
  std::cout << command << ": wrote " << manifest.outputs.size() << " artifact(s) under " << opts.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"domain-adaptive MLM pipeline for abusive-language benchmarks"};
  app.require_subcommand(1);

  std::map<std::string, CommonOpts> opts;
  for (const char* name : {"build-corpus", "train-vocab", "pretrain", "finetune", "evaluate", "portability",
                           "report"}) {
    CLI::App* cmd = app.add_subcommand(name);
    add_common(cmd, opts[name]);
  }

  // reproduce
  std::string manifest_path;
  std::string scratch_dir;
  CLI::App* reproduce_cmd = app.add_subcommand("reproduce", "re-run a recorded stage and verify digests");
  reproduce_cmd->add_option("manifest", manifest_path, "manifest file to reproduce")->required();
  reproduce_cmd->add_option("--scratch", scratch_dir, "scratch directory for the re-run");

  // preprocess: stdin -> stdout
  std::string mode = "finetuning";
  std::string aliases_path;
  CLI::App* preprocess_cmd = app.add_subcommand("preprocess", "normalize text from stdin to stdout");
  preprocess_cmd->add_option("--mode", mode, "retraining | finetuning")->capture_default_str();
  preprocess_cmd->add_option("--aliases", aliases_path, "emoji alias table file (default: built-in)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (reproduce_cmd->parsed()) {
      if (scratch_dir.empty()) scratch_dir = fs::temp_directory_path() / ("dapt-reproduce-" + std::to_string(::getpid()));
      dapt::ReproduceResult result = dapt::reproduce(manifest_path, scratch_dir);
      if (result.ok()) {
        std::cout << "reproduce: all digests match\n";
        return 0;
      }
      std::cerr << "reproduce: " << result.mismatches.size() << " divergence(s)\n";
      for (const std::string& m : result.mismatches) std::cerr << "  " << m << "\n";
      return 1;
    }
    if (preprocess_cmd->parsed()) {
      if (mode != "retraining" && mode != "finetuning") {
        std::cerr << "preprocess: --mode must be retraining or finetuning\n";
        return 2;
      }
      const dapt::PreprocessMode pm =
          mode == "retraining" ? dapt::PreprocessMode::retraining : dapt::PreprocessMode::finetuning;
      dapt::EmojiAliasTable table =
          aliases_path.empty() ? dapt::EmojiAliasTable::builtin() : dapt::EmojiAliasTable::load(aliases_path);
      std::string line;
      while (std::getline(std::cin, line)) std::cout << dapt::preprocess(line, pm, table) << "\n";
      return 0;
    }
    for (auto& [name, o] : opts)
      if (app.get_subcommand(name)->parsed()) return run_pipeline_command(name, o);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
