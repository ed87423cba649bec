#include "dapt/config.hpp"

#include <set>

#include "json.hpp"

namespace dapt {

using ojson = nlohmann::ordered_json;

RawConfig RawConfig::parse(std::string_view text, const std::string& origin) {
  RawConfig cfg;
  cfg.origin_ = origin;
  std::string section;
  int line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
      cfg.sections_[section];  // section may legitimately stay empty
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any [section]");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    cfg.set(section, key, value);
    cfg.line_of_[section + "." + key] = line_no;
  }
  return cfg;
}

RawConfig RawConfig::parse_file(const std::string& path) { return parse(read_file(path), path); }

bool RawConfig::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return false;
  for (const auto& [k, v] : it->second)
    if (k == key) return true;
  return false;
}

std::string RawConfig::get(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it != sections_.end())
    for (const auto& [k, v] : it->second)
      if (k == key) return v;
  throw ConfigError(origin_ + ": missing required key " + section + "." + key);
}

std::string RawConfig::get_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

uint64_t RawConfig::get_u64(const std::string& section, const std::string& key, uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": " + section + "." + key + " must be an integer, got '" + v + "'");
  }
}

double RawConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": " + section + "." + key + " must be a number, got '" + v + "'");
  }
}

void RawConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  auto& items = sections_[section];
  for (auto& [k, v] : items)
    if (k == key) {
      v = value;
      return;
    }
  items.emplace_back(key, value);
}

void RawConfig::set_dotted(const std::string& dotted, const std::string& value) {
  size_t dot = dotted.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
    throw ConfigError("override '" + dotted + "' must look like section.key");
  set(dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

std::vector<std::string> RawConfig::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sections_) out.push_back(name);
  return out;
}

const std::vector<std::pair<std::string, std::string>>& RawConfig::section_items(
    const std::string& section) const {
  static const std::vector<std::pair<std::string, std::string>> empty;
  auto it = sections_.find(section);
  return it == sections_.end() ? empty : it->second;
}

namespace {
const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"corpus",
       {"dumps", "allowlist", "window_start", "window_end", "drop_bodies", "heldout_size", "split_seed",
        "workers"}},
      {"tokenizer", {"vocab_size", "corpus"}},
      {"pretrain",
       {"layers", "hidden", "heads", "ff", "max_positions", "epochs", "batch_size", "max_len", "learning_rate",
        "mask_prob", "mask_token_frac", "random_frac", "keep_frac", "seed", "corpus", "heldout", "vocab",
        "init_checkpoint", "eval_seed", "eval_batch_size"}},
      {"finetune",
       {"learning_rate", "epochs", "adam_epsilon", "max_len", "batch_size", "warmup_steps", "seeds", "checkpoint",
        "dataset"}},
      {"evaluate", {"model", "dataset", "part"}},
      {"portability", {"models", "datasets"}},
      {"report", {"in_dataset", "portability"}},
  };
  return s;
}
const std::set<std::string>& dataset_schema() {
  static const std::set<std::string> s{"train",
                                       "test",
                                       "id_column",
                                       "text_column",
                                       "label_column",
                                       "positive_labels",
                                       "negative_labels",
                                       "expect_train_total",
                                       "expect_test_total",
                                       "expect_train_positive",
                                       "expect_test_positive"};
  return s;
}
}  // namespace

void RawConfig::validate_schema() const {
  for (const auto& [section, items] : sections_) {
    const std::set<std::string>* known = nullptr;
    if (starts_with(section, "dataset:")) {
      known = &dataset_schema();
    } else {
      auto it = schema().find(section);
      if (it == schema().end()) throw ConfigError(origin_ + ": unknown section [" + section + "]");
      known = &it->second;
    }
    for (const auto& [key, value] : items) {
      if (!known->count(key)) {
        auto ln = line_of_.find(section + "." + key);
        std::string where = ln == line_of_.end() ? "" : ":" + std::to_string(ln->second);
        throw ConfigError(origin_ + where + ": unknown key '" + key + "' in section [" + section + "]");
      }
    }
  }
}

std::string RawConfig::serialize() const {
  std::string out;
  for (const auto& [section, items] : sections_) {
    out += "[" + section + "]\n";
    for (const auto& [k, v] : items) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

std::string RawConfig::to_json() const {
  ojson j = ojson::object();
  for (const auto& [section, items] : sections_) {
    ojson s = ojson::object();
    for (const auto& [k, v] : items) s[k] = v;
    j[section] = s;
  }
  return j.dump(2);
}

RawConfig RawConfig::from_json(const std::string& text) {
  RawConfig cfg;
  ojson j = ojson::parse(text);
  for (auto& [section, items] : j.items())
    for (auto& [k, v] : items.items()) cfg.set(section, k, v.get<std::string>());
  return cfg;
}

RawConfig default_config() {
  // the published recipe: retraining scale from the corpus study, fine-tuning
  // from the benchmark table
  static const char* kDefaults =
      "[corpus]\n"
      "window_start = 2012-01\n"
      "window_end = 2015-06\n"
      "drop_bodies = [deleted],[removed]\n"
      "split_seed = 1\n"
      "[tokenizer]\n"
      "vocab_size = 2000\n"
      "[pretrain]\n"
      "layers = 2\n"
      "hidden = 64\n"
      "heads = 2\n"
      "ff = 256\n"
      "max_positions = 512\n"
      "epochs = 100\n"
      "batch_size = 64\n"
      "max_len = 512\n"
      "learning_rate = 5e-5\n"
      "mask_prob = 0.15\n"
      "mask_token_frac = 0.8\n"
      "random_frac = 0.1\n"
      "keep_frac = 0.1\n"
      "seed = 1\n"
      "[finetune]\n"
      "learning_rate = 1e-5\n"
      "epochs = 5\n"
      "adam_epsilon = 1e-8\n"
      "max_len = 100\n"
      "batch_size = 32\n"
      "warmup_steps = 0\n"
      "seeds = 1,2,3,4,5\n";
  return RawConfig::parse(kDefaults, "<defaults>");
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  for (const std::string& item : split(value, ',')) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& value) {
  std::vector<uint64_t> out;
  for (const std::string& item : parse_list(value)) out.push_back(std::stoull(item));
  return out;
}

}  // namespace dapt
