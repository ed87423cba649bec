#include <filesystem>

#include "dapt/digest.hpp"
#include "dapt/fixtures.hpp"
#include "dapt/mlm.hpp"
#include "dapt/pipeline.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace dapt;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  std::string root;
  explicit Workspace(const std::string& name) {
    root = (fs::temp_directory_path() / ("dapt_pipe_" + name)).string();
    fs::remove_all(root);
    fs::create_directories(root);
  }
  std::string path(const std::string& rel) const { return root + "/" + rel; }
};

RawConfig corpus_config(const Workspace& ws) {
  fixtures::write_all(ws.path("fx"));
  RawConfig cfg = default_config();
  cfg.set("corpus", "dumps", ws.path("fx/synth_dump.jsonl"));
  cfg.set("corpus", "allowlist", ws.path("fx/allowlist.txt"));
  cfg.set("corpus", "heldout_size", "50");
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("build-corpus stage writes artifacts, counters, and a manifest") {
  Workspace ws("build");
  RawConfig cfg = corpus_config(ws);
  RunManifest manifest = run_with_manifest("build-corpus", cfg, ws.path("out"));
  CHECK(fs::exists(ws.path("out/corpus_train.jsonl")));
  CHECK(fs::exists(ws.path("out/corpus_heldout.jsonl")));
  CHECK(fs::exists(ws.path("out/corpus_stats.tsv")));
  CHECK(fs::exists(ws.path("out/build_report.json")));
  CHECK(manifest.inputs.size() == 2);
  CHECK(manifest.outputs.size() == 5);

  nlohmann::json report = nlohmann::json::parse(read_file(ws.path("out/build_report.json")));
  uint64_t skipped = 0;
  for (const auto& [k, v] : report.at("skipped").items()) skipped += v.get<uint64_t>();
  CHECK(report.at("accepted").get<uint64_t>() + skipped == report.at("total_lines").get<uint64_t>());
  CHECK(report.at("total_lines").get<uint64_t>() == 1000);

  // manifests are append-only: a second run gets a fresh file
  RunManifest manifest2 = run_with_manifest("build-corpus", cfg, ws.path("out"));
  CHECK(fs::exists(ws.path("out/manifests/build-corpus-0.json")));
  CHECK(fs::exists(ws.path("out/manifests/build-corpus-1.json")));
  // and the rebuilt artifacts carry identical digests
  for (size_t i = 0; i < manifest.outputs.size(); ++i)
    CHECK(manifest.outputs[i].second == manifest2.outputs[i].second);
}

TEST_CASE("reproduce: clean replay matches, edited input is reported") {
  Workspace ws("repro");
  RawConfig cfg = corpus_config(ws);
  run_with_manifest("build-corpus", cfg, ws.path("out"));
  const std::string manifest_path = ws.path("out/manifests/build-corpus-0.json");

  ReproduceResult clean = reproduce(manifest_path, ws.path("scratch1"));
  CHECK(clean.ok());

  // edit the allowlist: reproduce must flag the input and diverge on outputs
  write_file(ws.path("fx/allowlist.txt"), "alpha\n");
  ReproduceResult edited = reproduce(manifest_path, ws.path("scratch2"));
  CHECK_FALSE(edited.ok());
  bool input_flagged = false, output_flagged = false;
  for (const std::string& m : edited.mismatches) {
    if (m.find("input changed") != std::string::npos) input_flagged = true;
    if (m.find("output diverged") != std::string::npos) output_flagged = true;
  }
  CHECK(input_flagged);
  CHECK(output_flagged);
}

TEST_CASE("train-vocab consumes the corpus stage output and reproduces") {
  Workspace ws("vocab");
  RawConfig cfg = corpus_config(ws);
  run_with_manifest("build-corpus", cfg, ws.path("out"));
  cfg.set("tokenizer", "vocab_size", "120");
  run_with_manifest("train-vocab", cfg, ws.path("out"));
  CHECK(fs::exists(ws.path("out/vocab.txt")));
  ReproduceResult r = reproduce(ws.path("out/manifests/train-vocab-0.json"), ws.path("scratch"));
  CHECK(r.ok());
}

TEST_CASE("pretrain with zero epochs records an untouched-parameter checkpoint") {
  Workspace ws("pre0");
  RawConfig cfg = corpus_config(ws);
  run_with_manifest("build-corpus", cfg, ws.path("out"));
  cfg.set("tokenizer", "vocab_size", "120");
  run_with_manifest("train-vocab", cfg, ws.path("out"));
  cfg.set("pretrain", "epochs", "0");
  cfg.set("pretrain", "layers", "1");
  cfg.set("pretrain", "hidden", "8");
  cfg.set("pretrain", "heads", "2");
  cfg.set("pretrain", "ff", "16");
  cfg.set("pretrain", "max_positions", "40");
  cfg.set("pretrain", "max_len", "40");
  RunManifest manifest = run_with_manifest("pretrain", cfg, ws.path("out"));
  CHECK(fs::exists(ws.path("out/checkpoint/model.bin")));
  CHECK(fs::exists(ws.path("out/checkpoint/loss_history.tsv")));
  CHECK(fs::exists(ws.path("out/pretrain_metrics.json")));

  nn::Checkpoint ckpt = nn::Checkpoint::load(ws.path("out/checkpoint"));
  nn::EncoderModel fresh(ckpt.encoder);
  fresh.init_params(1);  // the configured seed
  CHECK(ckpt.params == fresh.params());
  CHECK(ckpt.epoch_loss.empty());
  CHECK(manifest.config.get("pretrain", "epochs") == "0");
}

TEST_CASE("unknown config keys fail before any stage work") {
  Workspace ws("badkey");
  RawConfig cfg = corpus_config(ws);
  cfg.set("corpus", "wrong_knob", "1");
  CHECK_THROWS_WITH_AS(run_with_manifest("build-corpus", cfg, ws.path("out")), doctest::Contains("wrong_knob"),
                       ConfigError);
  CHECK_FALSE(fs::exists(ws.path("out/corpus_train.jsonl")));
}

TEST_CASE("unknown stage names are rejected") {
  Workspace ws("badstage");
  RawConfig cfg = default_config();
  CHECK_THROWS_AS(run_with_manifest("frobnicate", cfg, ws.path("out")), InvalidArgument);
}

TEST_CASE("manifest json round-trip") {
  Workspace ws("manifest");
  RawConfig cfg = corpus_config(ws);
  RunManifest m = run_with_manifest("build-corpus", cfg, ws.path("out"));
  RunManifest back = RunManifest::from_json(m.to_json());
  CHECK(back.command == "build-corpus");
  CHECK(back.outputs == m.outputs);
  CHECK(back.inputs == m.inputs);
  CHECK(back.config.serialize() == m.config.serialize());
}

TEST_SUITE_END();
