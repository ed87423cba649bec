#include <cmath>
#include <filesystem>
#include <map>

#include "dapt/finetune.hpp"
#include "dapt/fixtures.hpp"
#include "doctest.h"

using namespace dapt;

namespace {

// one tiny checkpoint shared by the suite (vocab over both domains)
const nn::Checkpoint& shared_checkpoint() {
  static const nn::Checkpoint ckpt = [] {
    Corpus mix = fixtures::corpus(fixtures::Domain::a, 150, 51);
    Corpus b = fixtures::corpus(fixtures::Domain::b, 150, 52);
    for (const CleanDocument& d : b.documents) mix.documents.push_back(d);
    Vocab vocab = train_vocab(mix, 160);

    nn::EncoderConfig ecfg;
    ecfg.layers = 1;
    ecfg.hidden = 16;
    ecfg.heads = 2;
    ecfg.ff = 32;
    ecfg.vocab = vocab.size();
    ecfg.max_positions = 40;
    nn::EncoderModel model(ecfg);
    model.init_params(4);

    nn::Checkpoint c;
    c.encoder = ecfg;
    c.params = model.params();
    c.vocab = vocab;
    c.seed = 4;
    return c;
  }();
  return ckpt;
}

std::vector<LabeledExample> labeled_from_rows(const std::vector<fixtures::TaskRow>& rows) {
  std::vector<LabeledExample> out;
  for (const fixtures::TaskRow& r : rows)
    out.push_back(LabeledExample{r.id, r.text, r.positive ? Label::positive : Label::negative});
  return out;
}

DatasetSplit tiny_split() {
  DatasetSplit split;
  split.provenance.name = "tiny";
  split.train = labeled_from_rows(fixtures::task_rows(fixtures::Domain::a, 0, 48, 24, 61));
  split.test = labeled_from_rows(fixtures::task_rows(fixtures::Domain::a, 0, 20, 10, 62));
  return split;
}

}  // namespace

TEST_SUITE_BEGIN("finetune");

TEST_CASE("defaults mirror the published recipe") {
  FinetuneConfig cfg;
  CHECK(cfg.learning_rate == 1e-5);
  CHECK(cfg.epochs == 5);
  CHECK(cfg.adam_eps == 1e-8);
  CHECK(cfg.max_len == 100);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.warmup_steps == 0);
}

TEST_CASE("decide: argmax with ties to negative, invariant under rescaling") {
  CHECK(decide(0.3, 0.7) == Label::positive);
  CHECK(decide(0.7, 0.3) == Label::negative);
  CHECK(decide(0.5, 0.5) == Label::negative);
  CHECK(decide(0.0, 0.0) == Label::negative);
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.next_double(), b = rng.next_double();
    const double c = 1e-6 + rng.next_double() * 100.0;
    CHECK(decide(a, b) == decide(c * a, c * b));
  }
}

TEST_CASE("zero-epoch fine-tuning still yields a working classifier") {
  FinetuneConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 1;
  DatasetSplit split = tiny_split();
  ClassifierModel model = finetune(shared_checkpoint(), split.train, cfg);
  CHECK(model.encoder.params() == shared_checkpoint().params);  // encoder untouched
  std::vector<Prediction> preds = predict(model, {"zorp flim", "grax the molp"});
  CHECK(preds.size() == 2);
  for (const Prediction& p : preds) {
    CHECK(p.positive_score >= 0.0);
    CHECK(p.positive_score <= 1.0);
    CHECK(p.label == decide(1.0 - p.positive_score, p.positive_score));
  }
}

TEST_CASE("finetune rejects empty training data") {
  FinetuneConfig cfg;
  CHECK_THROWS_AS(finetune(shared_checkpoint(), {}, cfg), InvalidArgument);
}

TEST_CASE("predictions are deterministic") {
  FinetuneConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 1e-3;
  cfg.seed = 5;
  DatasetSplit split = tiny_split();
  ClassifierModel m1 = finetune(shared_checkpoint(), split.train, cfg);
  ClassifierModel m2 = finetune(shared_checkpoint(), split.train, cfg);
  CHECK(m1.encoder.params() == m2.encoder.params());
  CHECK(m1.head_w == m2.head_w);
  std::vector<std::string> texts;
  for (const LabeledExample& ex : split.test) texts.push_back(ex.text);
  std::vector<Prediction> p1 = predict(m1, texts);
  std::vector<Prediction> p2 = predict(m1, texts);
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].label == p2[i].label);
    CHECK(p1[i].positive_score == p2[i].positive_score);
  }
}

TEST_CASE("replicate aggregates, selects the best run, and is reproducible") {
  FinetuneConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 5e-4;
  cfg.batch_size = 16;
  DatasetSplit split = tiny_split();
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::vector<ClassifierModel> models;
  ReplicateSummary s1 = replicate(shared_checkpoint(), split, cfg, seeds, &models);
  ReplicateSummary s2 = replicate(shared_checkpoint(), split, cfg, seeds);
  CHECK(s1.to_json() == s2.to_json());
  REQUIRE(s1.runs.size() == 3);
  REQUIRE(models.size() == 3);

  double max_macro = 0.0;
  for (const RunResult& r : s1.runs) max_macro = std::max(max_macro, r.report.macro_f1);
  CHECK(s1.runs[s1.best_index].report.macro_f1 == max_macro);

  const ClassifierModel& best = select_best(s1, models);
  EvalReport re_eval = evaluate_model(best, split.test, "tiny", "best");
  CHECK(re_eval.macro_f1 == s1.runs[s1.best_index].report.macro_f1);

  // mean over a single run equals the run itself, stddev zero
  ReplicateSummary single = replicate(shared_checkpoint(), split, cfg, {7});
  CHECK(single.metrics.at("macro_f1").stddev == 0.0);
  CHECK(single.metrics.at("macro_f1").mean == single.runs[0].report.macro_f1);

  CHECK_THROWS_AS(replicate(shared_checkpoint(), split, cfg, {}), InvalidArgument);
  std::vector<ClassifierModel> wrong_count;
  CHECK_THROWS_AS(select_best(s1, wrong_count), InvalidArgument);
}

TEST_CASE("best_run_index: argmax with ties to the lowest seed") {
  auto run = [](uint64_t seed, double macro) {
    RunResult r;
    r.seed = seed;
    r.report.macro_f1 = macro;
    return r;
  };
  CHECK(best_run_index({run(1, .72), run(2, .77), run(3, .75)}) == 1);
  CHECK(best_run_index({run(9, .5), run(4, .5), run(6, .5)}) == 1);  // seed 4 is lowest
  CHECK_THROWS_AS(best_run_index({}), InvalidArgument);
}

TEST_CASE("summary json round-trip") {
  FinetuneConfig cfg;
  cfg.epochs = 1;
  DatasetSplit split = tiny_split();
  ReplicateSummary s = replicate(shared_checkpoint(), split, cfg, {1, 2});
  ReplicateSummary back = ReplicateSummary::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());
}

TEST_CASE("classifier save/load round-trips predictions bit for bit") {
  FinetuneConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 3;
  DatasetSplit split = tiny_split();
  ClassifierModel model = finetune(shared_checkpoint(), split.train, cfg);
  namespace fs = std::filesystem;
  const std::string dir = fs::temp_directory_path() / "dapt_cls_test";
  fs::remove_all(dir);
  model.save(dir);
  ClassifierModel loaded = ClassifierModel::load(dir);
  std::vector<std::string> texts = {"zorp grax flim", "molp and twill"};
  std::vector<Prediction> a = predict(model, texts);
  std::vector<Prediction> b = predict(loaded, texts);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].positive_score == b[i].positive_score);
    CHECK(a[i].label == b[i].label);
  }
}

TEST_CASE("portability covers the full grid and names missing keys") {
  FinetuneConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 5e-4;
  DatasetSplit d1 = tiny_split();
  d1.provenance.name = "d1";
  DatasetSplit d2;
  d2.provenance.name = "d2";
  d2.train = labeled_from_rows(fixtures::task_rows(fixtures::Domain::a, 1, 48, 24, 63));
  d2.test = labeled_from_rows(fixtures::task_rows(fixtures::Domain::a, 1, 20, 10, 64));

  std::map<std::string, ClassifierModel> models;
  cfg.seed = 1;
  models.emplace("d1", finetune(shared_checkpoint(), d1.train, cfg));
  models.emplace("d2", finetune(shared_checkpoint(), d2.train, cfg));
  std::map<std::string, DatasetSplit> splits;
  splits.emplace("d1", d1);
  splits.emplace("d2", d2);

  PortabilityMatrix matrix = portability(models, splits);
  CHECK(matrix.datasets.size() == 2);
  CHECK(matrix.cells.size() == 4);
  CHECK_NOTHROW(matrix.at("d1", "d2"));
  PortabilityMatrix back = PortabilityMatrix::from_json(matrix.to_json());
  CHECK(back.to_json() == matrix.to_json());

  std::map<std::string, DatasetSplit> missing;
  missing.emplace("d1", d1);
  CHECK_THROWS_WITH_AS(portability(models, missing), doctest::Contains("d2"), InvalidArgument);

  // single dataset: a 1x1 grid
  std::map<std::string, ClassifierModel> one_model;
  one_model.emplace("d1", finetune(shared_checkpoint(), d1.train, cfg));
  std::map<std::string, DatasetSplit> one_split;
  one_split.emplace("d1", d1);
  CHECK(portability(one_model, one_split).cells.size() == 1);
}

TEST_CASE("render_tables emits the three tables and survives empty input") {
  const std::string empty = render_tables({}, {});
  CHECK(empty.find("(no runs)") != std::string::npos);
  CHECK(empty.find("In-dataset") != std::string::npos);
  CHECK(empty.find("Portability: macro F1") != std::string::npos);
  CHECK(empty.find("positive-class P / R") != std::string::npos);

  InDatasetRow row{"tiny", "adapted", MetricSummary{0.7652, 0.0061}, MetricSummary{0.623, 0.010}};
  const std::string doc = render_tables({row}, {});
  CHECK(doc.find(".765\xc2\xb1.006") != std::string::npos);
  CHECK(doc.find(".623\xc2\xb1.010") != std::string::npos);
}

TEST_SUITE_END();
