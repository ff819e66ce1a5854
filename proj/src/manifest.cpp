#include "mhbt/experiments/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mhbt/error.hpp"

namespace mhbt::experiments {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw ConfigError("manifest field '" + field + "': " + what);
}

const json& field(const json& j, const std::string& name, json::value_t type, const char* type_name) {
  const auto it = j.find(name);
  if (it == j.end()) bad_field(name, "missing");
  const bool ok = it->type() == type ||
                  (type == json::value_t::number_float && it->is_number()) ||
                  (type == json::value_t::number_unsigned && it->is_number_integer() && *it >= 0);
  if (!ok) bad_field(name, std::string("expected ") + type_name);
  return *it;
}

std::vector<std::string> string_list(const json& j, const std::string& name) {
  std::vector<std::string> out;
  const auto& arr = field(j, name, json::value_t::array, "an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) bad_field(name + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

std::map<std::string, std::string> string_map(const json& j, const std::string& name) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : field(j, name, json::value_t::object, "an object").items()) {
    if (!v.is_string()) bad_field(name + "." + k, "expected a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

}  // namespace

RunManifest make_manifest(const Config& cfg) {
  RunManifest m;
  m.experiment = to_string(cfg.experiment());
  m.config = cfg.values();
  m.config_hash = cfg.hash();
  return m;
}

std::string to_json(const RunManifest& m) {
  json j;
  j["schema"] = kManifestSchema;
  j["experiment"] = m.experiment;
  j["library_version"] = m.library_version;
  j["config"] = m.config;
  j["config_hash"] = m.config_hash;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  j["chain_seeds"] = m.chain_seeds;
  j["substitutions"] = m.substitutions;
  j["outputs"] = m.outputs;
  j["results"] = m.results;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("manifest: top level must be an object");
  const auto schema = field(j, "schema", json::value_t::string, "a string").get<std::string>();
  if (schema != kManifestSchema) bad_field("schema", "unsupported value '" + schema + "'");

  RunManifest m;
  m.experiment = field(j, "experiment", json::value_t::string, "a string").get<std::string>();
  try {
    parse_experiment(m.experiment);
  } catch (const ConfigError&) {
    bad_field("experiment", "unknown experiment '" + m.experiment + "'");
  }
  m.library_version = field(j, "library_version", json::value_t::string, "a string").get<std::string>();
  m.config = string_map(j, "config");
  m.config_hash = field(j, "config_hash", json::value_t::string, "a string").get<std::string>();
  m.wall_clock_seconds = field(j, "wall_clock_seconds", json::value_t::number_float, "a number").get<double>();
  const auto& seeds = field(j, "chain_seeds", json::value_t::array, "an array");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!seeds[i].is_number_unsigned() && !(seeds[i].is_number_integer() && seeds[i] >= 0))
      bad_field("chain_seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
    m.chain_seeds.push_back(seeds[i].get<std::uint64_t>());
  }
  m.substitutions = string_list(j, "substitutions");
  m.outputs = string_list(j, "outputs");
  m.results = string_map(j, "results");

  // the recorded configuration must be complete and consistent with its hash
  const Config cfg = config_from_manifest(m);
  if (cfg.hash() != m.config_hash)
    bad_field("config_hash", "does not match the recorded config (expected " + cfg.hash() + ")");
  return m;
}

Config config_from_manifest(const RunManifest& m) {
  Config cfg = Config::defaults(parse_experiment(m.experiment));
  for (const auto& info : key_table(cfg.experiment()))
    if (!m.config.count(info.key)) bad_field("config." + info.key, "missing");
  for (const auto& [k, v] : m.config) {
    if (!cfg.has(k)) bad_field("config." + k, "not a key of " + m.experiment);
    cfg.set(k, v);
  }
  return cfg;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << to_json(m);
  if (!out) throw IoError("write failed: " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

}  // namespace mhbt::experiments
