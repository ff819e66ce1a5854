#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mhbt/experiments/config.hpp"

namespace mhbt::experiments {

inline constexpr const char* kLibraryVersion = "0.3.0";
inline constexpr const char* kManifestSchema = "mhbt-run-manifest/1";

/// Everything needed to re-run an experiment and check its outputs.
struct RunManifest {
  std::string experiment;
  std::string library_version = kLibraryVersion;
  std::map<std::string, std::string> config;  ///< resolved, defaults included
  std::string config_hash;
  double wall_clock_seconds = 0;
  std::vector<std::uint64_t> chain_seeds;
  std::vector<std::string> substitutions;     ///< desk-scale departures from the published protocol
  std::vector<std::string> outputs;           ///< files written, relative to the output directory
  std::map<std::string, std::string> results; ///< scalar results and derived settings
};

RunManifest make_manifest(const Config& cfg);

std::string to_json(const RunManifest& m);

/// Parses and validates; errors name the offending field.
RunManifest manifest_from_json(const std::string& text);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// Rebuilds the configuration recorded in a manifest.
Config config_from_manifest(const RunManifest& m);

}  // namespace mhbt::experiments
