#include "dapt/manifest.hpp"

#include <filesystem>

#include "json.hpp"

namespace dapt {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string RunManifest::to_json() const {
  ojson j;
  j["format_version"] = format_version;
  j["command"] = command;
  j["config"] = ojson::parse(config.to_json());
  j["out_dir"] = out_dir;
  j["inputs"] = ojson::array();
  for (const auto& [path, digest] : inputs) j["inputs"].push_back({{"path", path}, {"sha256", digest}});
  j["outputs"] = ojson::array();
  for (const auto& [path, digest] : outputs) j["outputs"].push_back({{"path", path}, {"sha256", digest}});
  j["started_unix_ms"] = started_unix_ms;
  j["wall_ms"] = wall_ms;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  ojson j = ojson::parse(text);
  RunManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1) throw InvalidArgument("unsupported manifest format version");
  m.command = j.at("command").get<std::string>();
  m.config = RawConfig::from_json(j.at("config").dump());
  m.out_dir = j.at("out_dir").get<std::string>();
  for (const ojson& in : j.at("inputs"))
    m.inputs.emplace_back(in.at("path").get<std::string>(), in.at("sha256").get<std::string>());
  for (const ojson& out : j.at("outputs"))
    m.outputs.emplace_back(out.at("path").get<std::string>(), out.at("sha256").get<std::string>());
  m.started_unix_ms = j.at("started_unix_ms").get<int64_t>();
  m.wall_ms = j.at("wall_ms").get<int64_t>();
  return m;
}

std::string RunManifest::write(const std::string& base_dir) const {
  fs::create_directories(base_dir + "/manifests");
  for (int n = 0;; ++n) {
    std::string path = base_dir + "/manifests/" + command + "-" + std::to_string(n) + ".json";
    if (!fs::exists(path)) {
      write_file(path, to_json());
      return path;
    }
  }
}

RunManifest RunManifest::load(const std::string& path) { return from_json(read_file(path)); }

}  // namespace dapt
