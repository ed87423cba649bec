#include "dapt/pipeline.hpp"

#include <chrono>
#include <filesystem>

#include "dapt/corpus.hpp"
#include "dapt/digest.hpp"
#include "dapt/finetune.hpp"
#include "dapt/mlm.hpp"
#include "dapt/preprocess.hpp"
#include "dapt/tokenizer.hpp"
#include "json.hpp"

namespace dapt {

namespace fs = std::filesystem;
using nlohmann::json;

static int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Fills a defaulted path into the config so the manifest snapshot is
// self-contained.
static std::string resolve_path(RawConfig& cfg, const std::string& section, const std::string& key,
                                const std::string& fallback) {
  std::string v = cfg.get_or(section, key, fallback);
  cfg.set(section, key, v);
  return v;
}

static StageIo stage_build_corpus(RawConfig& cfg, const std::string& out) {
  StageIo io;
  std::vector<std::string> dumps = parse_list(cfg.get("corpus", "dumps"));
  std::string allowlist_path = cfg.get("corpus", "allowlist");
  io.inputs = dumps;
  io.inputs.push_back(allowlist_path);

  CorpusConfig ccfg;
  ccfg.allowlist = CorpusConfig::load_allowlist(allowlist_path);
  ccfg.window_start = parse_year_month(cfg.get_or("corpus", "window_start", "2012-01"));
  ccfg.window_end = parse_year_month(cfg.get_or("corpus", "window_end", "2015-06"));
  ccfg.drop_bodies.clear();
  for (const std::string& b : parse_list(cfg.get_or("corpus", "drop_bodies", "[deleted],[removed]")))
    ccfg.drop_bodies.insert(b);
  const int workers = static_cast<int>(cfg.get_u64("corpus", "workers", 0));

  BuildCounters counters;
  Corpus corpus = build_from_files(
      dumps, ccfg, [](std::string_view t) { return preprocess(t, PreprocessMode::retraining); }, &counters,
      workers);

  const uint64_t heldout_size = cfg.get_u64("corpus", "heldout_size", 0);
  const uint64_t split_seed = cfg.get_u64("corpus", "split_seed", 1);
  SplitCorpus parts = split(corpus, heldout_size, split_seed);

  parts.train.save_jsonl(out + "/corpus_train.jsonl");
  parts.heldout.save_jsonl(out + "/corpus_heldout.jsonl");
  write_file(out + "/corpus_stats.tsv", corpus.stats_table());
  write_file(out + "/corpus_stats.json", corpus.stats_json());

  json report;
  report["schema_version"] = 1;
  report["total_lines"] = counters.total_lines;
  report["accepted"] = counters.accepted;
  report["skipped"] = json::object();
  for (const auto& [reason, count] : counters.skipped) report["skipped"][skip_reason_name(reason)] = count;
  report["train_messages"] = parts.train.size();
  report["heldout_messages"] = parts.heldout.size();
  report["split_seed"] = split_seed;
  report["token_basis"] = "whitespace";
  report["token_count"] = corpus.token_count;
  write_file(out + "/build_report.json", report.dump(2) + "\n");

  io.outputs = {"corpus_train.jsonl", "corpus_heldout.jsonl", "corpus_stats.tsv", "corpus_stats.json",
                "build_report.json"};
  return io;
}

static StageIo stage_train_vocab(RawConfig& cfg, const std::string& out) {
  StageIo io;
  std::string corpus_path = resolve_path(cfg, "tokenizer", "corpus", out + "/corpus_train.jsonl");
  io.inputs.push_back(corpus_path);
  Corpus corpus = Corpus::load_jsonl(corpus_path);
  Vocab vocab = train_vocab(corpus, cfg.get_u64("tokenizer", "vocab_size", 2000));
  vocab.save(out + "/vocab.txt");
  io.outputs = {"vocab.txt"};
  return io;
}

static nn::MaskingConfig masking_from(const RawConfig& cfg) {
  nn::MaskingConfig m;
  m.mask_prob = cfg.get_double("pretrain", "mask_prob", 0.15);
  m.mask_token_frac = cfg.get_double("pretrain", "mask_token_frac", 0.8);
  m.random_frac = cfg.get_double("pretrain", "random_frac", 0.1);
  m.keep_frac = cfg.get_double("pretrain", "keep_frac", 0.1);
  return m;
}

static StageIo stage_pretrain(RawConfig& cfg, const std::string& out) {
  StageIo io;
  std::string corpus_path = resolve_path(cfg, "pretrain", "corpus", out + "/corpus_train.jsonl");
  std::string vocab_path = resolve_path(cfg, "pretrain", "vocab", out + "/vocab.txt");
  io.inputs = {corpus_path, vocab_path};

  Corpus corpus = Corpus::load_jsonl(corpus_path);
  Vocab vocab = Vocab::load(vocab_path);

  nn::RetrainConfig rcfg;
  rcfg.epochs = cfg.get_u64("pretrain", "epochs", 100);
  rcfg.batch_size = cfg.get_u64("pretrain", "batch_size", 64);
  rcfg.max_len = cfg.get_u64("pretrain", "max_len", 512);
  rcfg.learning_rate = cfg.get_double("pretrain", "learning_rate", 5e-5);
  rcfg.seed = cfg.get_u64("pretrain", "seed", 1);
  nn::MaskingConfig mcfg = masking_from(cfg);

  nn::EncoderModel* model = nullptr;
  nn::EncoderModel fresh{[&] {
    nn::EncoderConfig ecfg;
    ecfg.layers = cfg.get_u64("pretrain", "layers", 2);
    ecfg.hidden = cfg.get_u64("pretrain", "hidden", 64);
    ecfg.heads = cfg.get_u64("pretrain", "heads", 2);
    ecfg.ff = cfg.get_u64("pretrain", "ff", ecfg.hidden * 4);
    ecfg.max_positions = cfg.get_u64("pretrain", "max_positions", 512);
    ecfg.vocab = vocab.size();
    return ecfg;
  }()};

  const std::string init_ckpt = cfg.get_or("pretrain", "init_checkpoint", "");
  if (!init_ckpt.empty()) {
    nn::Checkpoint base = nn::Checkpoint::load(init_ckpt);
    fresh = nn::EncoderModel(base.encoder);
    fresh.params() = base.params;
    for (const char* f : {"/model.bin", "/config.json", "/vocab.txt"}) io.inputs.push_back(init_ckpt + f);
  } else {
    fresh.init_params(rcfg.seed);
  }
  model = &fresh;

  // held-out perplexity before/after, when a held-out corpus is available
  std::string heldout_path = resolve_path(cfg, "pretrain", "heldout", out + "/corpus_heldout.jsonl");
  const uint64_t eval_seed = cfg.get_u64("pretrain", "eval_seed", 1);
  const uint64_t eval_batch = cfg.get_u64("pretrain", "eval_batch_size", 32);
  Corpus heldout;
  bool have_heldout = fs::exists(heldout_path);
  double ppl_before = 0.0;
  if (have_heldout) {
    io.inputs.push_back(heldout_path);
    heldout = Corpus::load_jsonl(heldout_path);
    have_heldout = !heldout.documents.empty();
  }
  if (have_heldout)
    ppl_before = nn::perplexity(*model, vocab, heldout, mcfg, rcfg.max_len, eval_batch, eval_seed);

  nn::Checkpoint ckpt = nn::retrain(*model, vocab, corpus, rcfg, mcfg);
  ckpt.save(out + "/checkpoint");

  json metrics;
  metrics["schema_version"] = 1;
  metrics["epochs"] = rcfg.epochs;
  metrics["sequences"] = nn::encode_corpus_chunked(corpus, vocab, rcfg.max_len).size();
  if (!ckpt.epoch_loss.empty()) {
    metrics["first_epoch_loss"] = ckpt.epoch_loss.front();
    metrics["final_epoch_loss"] = ckpt.epoch_loss.back();
  }
  if (have_heldout) {
    metrics["heldout_perplexity_before"] = ppl_before;
    metrics["heldout_perplexity_after"] =
        nn::perplexity(*model, vocab, heldout, mcfg, rcfg.max_len, eval_batch, eval_seed);
  }
  write_file(out + "/pretrain_metrics.json", metrics.dump(2) + "\n");

  io.outputs = {"checkpoint/model.bin", "checkpoint/config.json", "checkpoint/vocab.txt",
                "checkpoint/loss_history.tsv", "pretrain_metrics.json"};
  return io;
}

DatasetSpec dataset_spec_from_config(const RawConfig& cfg, const std::string& name) {
  const std::string section = "dataset:" + name;
  if (cfg.section_items(section).empty())
    throw ConfigError("no [" + section + "] section configured for dataset '" + name + "'");
  DatasetSpec spec;
  spec.name = name;
  spec.train_path = cfg.get(section, "train");
  spec.test_path = cfg.get(section, "test");
  spec.id_column = cfg.get_or(section, "id_column", "id");
  spec.text_column = cfg.get_or(section, "text_column", "text");
  spec.label_column = cfg.get_or(section, "label_column", "label");
  for (const std::string& raw : parse_list(cfg.get(section, "positive_labels")))
    spec.label_map[raw] = Label::positive;
  for (const std::string& raw : parse_list(cfg.get(section, "negative_labels")))
    spec.label_map[raw] = Label::negative;
  if (cfg.has(section, "expect_train_total")) spec.expect_train_total = cfg.get_u64(section, "expect_train_total", 0);
  if (cfg.has(section, "expect_test_total")) spec.expect_test_total = cfg.get_u64(section, "expect_test_total", 0);
  if (cfg.has(section, "expect_train_positive"))
    spec.expect_train_positive = cfg.get_u64(section, "expect_train_positive", 0);
  if (cfg.has(section, "expect_test_positive"))
    spec.expect_test_positive = cfg.get_u64(section, "expect_test_positive", 0);
  return spec;
}

static StageIo stage_finetune(RawConfig& cfg, const std::string& out) {
  StageIo io;
  const std::string ckpt_dir = resolve_path(cfg, "finetune", "checkpoint", out + "/checkpoint");
  const std::string dataset_name = cfg.get("finetune", "dataset");
  DatasetSpec spec = dataset_spec_from_config(cfg, dataset_name);
  for (const char* f : {"/model.bin", "/config.json", "/vocab.txt"}) io.inputs.push_back(ckpt_dir + f);
  io.inputs.push_back(spec.train_path);
  io.inputs.push_back(spec.test_path);

  nn::Checkpoint ckpt = nn::Checkpoint::load(ckpt_dir);
  DatasetSplit dsplit = load_dataset(spec);

  FinetuneConfig fcfg;
  fcfg.learning_rate = cfg.get_double("finetune", "learning_rate", 1e-5);
  fcfg.epochs = cfg.get_u64("finetune", "epochs", 5);
  fcfg.adam_eps = cfg.get_double("finetune", "adam_epsilon", 1e-8);
  fcfg.max_len = cfg.get_u64("finetune", "max_len", 100);
  fcfg.batch_size = cfg.get_u64("finetune", "batch_size", 32);
  fcfg.warmup_steps = cfg.get_u64("finetune", "warmup_steps", 0);
  std::vector<uint64_t> seeds = parse_u64_list(cfg.get_or("finetune", "seeds", "1,2,3,4,5"));

  std::vector<ClassifierModel> models;
  ReplicateSummary summary = replicate(ckpt, dsplit, fcfg, seeds, &models);

  const std::string base = out + "/finetune_" + dataset_name;
  fs::create_directories(base);
  write_file(base + "/summary.json", summary.to_json() + "\n");
  write_file(base + "/validation.txt", validate_dataset(dsplit).to_text());
  for (size_t i = 0; i < models.size(); ++i)
    models[i].save(base + "/run_" + std::to_string(summary.runs[i].seed));
  select_best(summary, models).save(base + "/best");

  // per-replicate index: seed, metrics, and where the model went
  json runs = json::array();
  for (size_t i = 0; i < summary.runs.size(); ++i) {
    const RunResult& r = summary.runs[i];
    runs.push_back({{"seed", r.seed},
                    {"model_path", "finetune_" + dataset_name + "/run_" + std::to_string(r.seed)},
                    {"macro_f1", r.report.macro_f1},
                    {"positive_f1", r.report.positive.f1},
                    {"best", i == summary.best_index}});
  }
  write_file(base + "/runs.json", runs.dump(2) + "\n");

  InDatasetRow row{dataset_name, "checkpoint", summary.metrics.at("macro_f1"), summary.metrics.at("positive_f1")};
  write_file(base + "/table.txt", render_tables({row}, {}));

  const std::string rel = "finetune_" + dataset_name;
  io.outputs = {rel + "/summary.json", rel + "/validation.txt", rel + "/table.txt", rel + "/runs.json"};
  for (const RunResult& r : summary.runs) {
    const std::string run = rel + "/run_" + std::to_string(r.seed);
    for (const char* f : {"/classifier.bin", "/config.json", "/vocab.txt"}) io.outputs.push_back(run + f);
  }
  for (const char* f : {"/classifier.bin", "/config.json", "/vocab.txt"})
    io.outputs.push_back(rel + "/best" + std::string(f));
  return io;
}

static StageIo stage_evaluate(RawConfig& cfg, const std::string& out) {
  StageIo io;
  const std::string model_dir = cfg.get("evaluate", "model");
  const std::string dataset_name = cfg.get("evaluate", "dataset");
  const std::string part = cfg.get_or("evaluate", "part", "test");
  DatasetSpec spec = dataset_spec_from_config(cfg, dataset_name);
  for (const char* f : {"/classifier.bin", "/config.json", "/vocab.txt"}) io.inputs.push_back(model_dir + f);
  io.inputs.push_back(part == "train" ? spec.train_path : spec.test_path);

  ClassifierModel model = ClassifierModel::load(model_dir);
  DatasetSplit dsplit = load_dataset(spec);
  const std::vector<LabeledExample>& examples = part == "train" ? dsplit.train : dsplit.test;
  EvalReport report = evaluate_model(model, examples, dataset_name, model_dir);

  const std::string stem = "evaluate_" + dataset_name;
  write_file(out + "/" + stem + ".json", report.to_json() + "\n");
  std::string text = "dataset " + dataset_name + " (" + part + ")\n" +
                     "macro_f1 " + format_metric(report.macro_f1) + "\n" +
                     "positive P/R/F1 " + format_metric(report.positive.precision) + " " +
                     format_metric(report.positive.recall) + " " + format_metric(report.positive.f1) + "\n" +
                     "negative P/R/F1 " + format_metric(report.negative.precision) + " " +
                     format_metric(report.negative.recall) + " " + format_metric(report.negative.f1) + "\n";
  write_file(out + "/" + stem + ".txt", text);
  io.outputs = {stem + ".json", stem + ".txt"};
  return io;
}

static StageIo stage_portability(RawConfig& cfg, const std::string& out) {
  StageIo io;
  std::map<std::string, ClassifierModel> models;
  for (const std::string& item : parse_list(cfg.get("portability", "models"))) {
    size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("portability.models entries must look like dataset=model_dir");
    const std::string name = trim(item.substr(0, eq));
    const std::string dir = trim(item.substr(eq + 1));
    models.emplace(name, ClassifierModel::load(dir));
    for (const char* f : {"/classifier.bin", "/config.json", "/vocab.txt"}) io.inputs.push_back(dir + f);
  }
  std::map<std::string, DatasetSplit> splits;
  for (const std::string& name : parse_list(cfg.get("portability", "datasets"))) {
    DatasetSpec spec = dataset_spec_from_config(cfg, name);
    io.inputs.push_back(spec.train_path);
    io.inputs.push_back(spec.test_path);
    splits.emplace(name, load_dataset(spec));
  }

  PortabilityMatrix matrix = portability(models, splits);
  write_file(out + "/portability.json", matrix.to_json() + "\n");
  write_file(out + "/portability.txt", render_tables({}, {{"portability", matrix}}));
  io.outputs = {"portability.json", "portability.txt"};
  return io;
}

static StageIo stage_report(RawConfig& cfg, const std::string& out) {
  StageIo io;
  std::vector<InDatasetRow> rows;
  for (const std::string& item : parse_list(cfg.get_or("report", "in_dataset", ""))) {
    // dataset:model:path/to/summary.json
    std::vector<std::string> parts = split(item, ':');
    if (parts.size() != 3)
      throw ConfigError("report.in_dataset entries must look like dataset:model:summary.json");
    ReplicateSummary s = ReplicateSummary::from_json(read_file(trim(parts[2])));
    io.inputs.push_back(trim(parts[2]));
    rows.push_back(InDatasetRow{trim(parts[0]), trim(parts[1]), s.metrics.at("macro_f1"),
                                s.metrics.at("positive_f1")});
  }
  std::map<std::string, PortabilityMatrix> matrices;
  for (const std::string& item : parse_list(cfg.get_or("report", "portability", ""))) {
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("report.portability entries must look like model:matrix.json");
    const std::string path = trim(item.substr(colon + 1));
    matrices[trim(item.substr(0, colon))] = PortabilityMatrix::from_json(read_file(path));
    io.inputs.push_back(path);
  }

  write_file(out + "/report.txt", render_tables(rows, matrices));
  json j;
  j["schema_version"] = 1;
  j["in_dataset"] = json::array();
  for (const InDatasetRow& r : rows)
    j["in_dataset"].push_back({{"dataset", r.dataset},
                               {"model", r.model},
                               {"macro_f1", {{"mean", r.macro_f1.mean}, {"stddev", r.macro_f1.stddev}}},
                               {"positive_f1", {{"mean", r.positive_f1.mean}, {"stddev", r.positive_f1.stddev}}}});
  j["portability"] = json::object();
  for (const auto& [name, m] : matrices) j["portability"][name] = json::parse(m.to_json());
  write_file(out + "/report.json", j.dump(2) + "\n");
  io.outputs = {"report.txt", "report.json"};
  return io;
}

StageIo run_stage(const std::string& command, RawConfig& cfg, const std::string& out) {
  cfg.validate_schema();
  fs::create_directories(out);
  if (command == "build-corpus") return stage_build_corpus(cfg, out);
  if (command == "train-vocab") return stage_train_vocab(cfg, out);
  if (command == "pretrain") return stage_pretrain(cfg, out);
  if (command == "finetune") return stage_finetune(cfg, out);
  if (command == "evaluate") return stage_evaluate(cfg, out);
  if (command == "portability") return stage_portability(cfg, out);
  if (command == "report") return stage_report(cfg, out);
  throw InvalidArgument("unknown pipeline stage '" + command + "'");
}

RunManifest run_with_manifest(const std::string& command, RawConfig cfg, const std::string& out) {
  RunManifest m;
  m.command = command;
  m.out_dir = out;
  m.started_unix_ms = now_ms();
  StageIo io = run_stage(command, cfg, out);
  m.wall_ms = now_ms() - m.started_unix_ms;
  m.config = cfg;
  for (const std::string& path : io.inputs) m.inputs.emplace_back(path, sha256_file(path));
  for (const std::string& rel : io.outputs) m.outputs.emplace_back(rel, sha256_file(out + "/" + rel));
  m.write(out);
  return m;
}

ReproduceResult reproduce(const std::string& manifest_path, const std::string& scratch_dir) {
  RunManifest recorded = RunManifest::load(manifest_path);
  ReproduceResult result;
  for (const auto& [path, digest] : recorded.inputs) {
    if (!fs::exists(path)) {
      result.mismatches.push_back("input missing: " + path);
    } else if (sha256_file(path) != digest) {
      result.mismatches.push_back("input changed: " + path);
    }
  }
  RawConfig cfg = recorded.config;
  StageIo io = run_stage(recorded.command, cfg, scratch_dir);
  (void)io;
  for (const auto& [rel, digest] : recorded.outputs) {
    const std::string fresh = scratch_dir + "/" + rel;
    if (!fs::exists(fresh)) {
      result.mismatches.push_back("output not regenerated: " + rel);
    } else if (sha256_file(fresh) != digest) {
      result.mismatches.push_back("output diverged: " + rel);
    }
  }
  return result;
}

}  // namespace dapt
