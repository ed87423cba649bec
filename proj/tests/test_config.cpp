#include "dapt/config.hpp"
#include "doctest.h"

using namespace dapt;

#ifndef DAPT_SOURCE_DIR
#define DAPT_SOURCE_DIR "."
#endif

TEST_SUITE_BEGIN("config");

TEST_CASE("sections, comments, and values parse") {
  RawConfig cfg = RawConfig::parse(
      "# top comment\n"
      "[corpus]\n"
      "dumps = a.jsonl,b.jsonl  # inline comment\n"
      "heldout_size = 10\n"
      "\n"
      "[finetune]\n"
      "learning_rate = 1e-5\n");
  CHECK(cfg.get("corpus", "dumps") == "a.jsonl,b.jsonl");
  CHECK(cfg.get_u64("corpus", "heldout_size", 0) == 10);
  CHECK(cfg.get_double("finetune", "learning_rate", 0) == 1e-5);
  CHECK(cfg.get_or("corpus", "absent", "fallback") == "fallback");
  CHECK_THROWS_AS(cfg.get("corpus", "absent"), ConfigError);
}

TEST_CASE("parse errors carry the line number") {
  CHECK_THROWS_WITH_AS(RawConfig::parse("[corpus]\nnokey\n", "f.cfg"), doctest::Contains("f.cfg:2"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(RawConfig::parse("key = 1\n", "f.cfg"), doctest::Contains("outside any [section]"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(RawConfig::parse("[oops\n", "f.cfg"), doctest::Contains("unterminated"), ConfigError);
}

TEST_CASE("schema validation names unknown keys and their line") {
  RawConfig cfg = RawConfig::parse("[corpus]\ndumps = x\ntypo_key = 1\n", "bad.cfg");
  CHECK_THROWS_WITH_AS(cfg.validate_schema(), doctest::Contains("typo_key"), ConfigError);
  CHECK_THROWS_WITH_AS(cfg.validate_schema(), doctest::Contains("bad.cfg:3"), ConfigError);

  RawConfig cfg2 = RawConfig::parse("[nonsense]\nx = 1\n");
  CHECK_THROWS_WITH_AS(cfg2.validate_schema(), doctest::Contains("[nonsense]"), ConfigError);

  RawConfig ok = RawConfig::parse("[dataset:mine]\ntrain = t.tsv\ntest = s.tsv\npositive_labels = X\n");
  CHECK_NOTHROW(ok.validate_schema());
  RawConfig bad_ds = RawConfig::parse("[dataset:mine]\nrows = 3\n");
  CHECK_THROWS_WITH_AS(bad_ds.validate_schema(), doctest::Contains("rows"), ConfigError);
}

TEST_CASE("dotted overrides") {
  RawConfig cfg = RawConfig::parse("[pretrain]\nepochs = 100\n");
  cfg.set_dotted("pretrain.epochs", "3");
  cfg.set_dotted("dataset:off.train", "x.tsv");
  CHECK(cfg.get("pretrain", "epochs") == "3");
  CHECK(cfg.get("dataset:off", "train") == "x.tsv");
  CHECK_THROWS_AS(cfg.set_dotted("nodot", "1"), ConfigError);
}

TEST_CASE("type errors name the key") {
  RawConfig cfg = RawConfig::parse("[pretrain]\nepochs = many\n");
  CHECK_THROWS_WITH_AS(cfg.get_u64("pretrain", "epochs", 0), doctest::Contains("pretrain.epochs"), ConfigError);
}

TEST_CASE("serialize/json round-trips preserve every value") {
  RawConfig cfg = RawConfig::parse("[corpus]\ndumps = a\n[pretrain]\nepochs = 2\nseed = 9\n");
  RawConfig again = RawConfig::parse(cfg.serialize());
  CHECK(again.serialize() == cfg.serialize());
  RawConfig from_json = RawConfig::from_json(cfg.to_json());
  CHECK(from_json.get("pretrain", "seed") == "9");
  CHECK(from_json.serialize() == cfg.serialize());
}

TEST_CASE("compiled-in defaults equal the bundled defaults file") {
  RawConfig compiled = default_config();
  RawConfig bundled = RawConfig::parse_file(std::string(DAPT_SOURCE_DIR) + "/configs/defaults.cfg");
  CHECK_NOTHROW(bundled.validate_schema());
  for (const std::string& section : bundled.sections())
    for (const auto& [key, value] : bundled.section_items(section)) {
      INFO(section, ".", key);
      CHECK(compiled.get_or(section, key, "<missing>") == value);
    }
  // and nothing in the compiled defaults is missing from the file
  for (const std::string& section : compiled.sections())
    for (const auto& [key, value] : compiled.section_items(section)) {
      INFO(section, ".", key);
      CHECK(bundled.get_or(section, key, "<missing>") == value);
    }
}

TEST_CASE("list parsing") {
  CHECK(parse_list("a, b ,c,,") == std::vector<std::string>{"a", "b", "c"});
  CHECK(parse_u64_list("1,2,3") == std::vector<uint64_t>{1, 2, 3});
  CHECK(parse_list("").empty());
}

TEST_SUITE_END();
