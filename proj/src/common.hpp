// Helpers shared by the experiment runners; not installed.
#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mhbt/dataset.hpp"
#include "mhbt/error.hpp"
#include "mhbt/experiments/config.hpp"
#include "mhbt/experiments/experiments.hpp"
#include "mhbt/experiments/manifest.hpp"
#include "mhbt/mhbt.hpp"
#include "mhbt/rng.hpp"

namespace mhbt::experiments::internal {

/// Parses a scalar-or-list key into a length-d vector; a single value is broadcast.
inline Vector<double> vector_key(const Config& cfg, const std::string& key, Eigen::Index d) {
  const auto values = cfg.reals(key);
  if (values.size() == 1) return Vector<double>::Constant(d, values.front());
  if (static_cast<Eigen::Index>(values.size()) != d)
    throw ConfigError("config key '" + key + "': expected 1 or " + std::to_string(d) + " values, got " +
                      std::to_string(values.size()));
  return Eigen::Map<const Vector<double>>(values.data(), d);
}

/// Optional vector key: empty text yields `fallback`.
inline Vector<double> vector_key_or(const Config& cfg, const std::string& key, const Vector<double>& fallback) {
  if (cfg.text(key).empty()) return fallback;
  return vector_key(cfg, key, fallback.size());
}

/// Dataset from data.path when set, otherwise generated.
inline Dataset<double> load_or_generate(const Config& cfg, const ModelSpec<double>& model,
                                        const Vector<double>& theta_star) {
  if (cfg.has("data.path") && !cfg.text("data.path").empty()) {
    const std::filesystem::path p = cfg.text("data.path");
    if (!std::filesystem::exists(p)) throw ConfigError("data.path does not exist: " + p.string());
    auto data = read_csv<double>(p.string());
    if (data.width() != record_width(model))
      throw ConfigError("data.path: record width " + std::to_string(data.width()) + " does not match the model (" +
                        std::to_string(record_width(model)) + ")");
    return data;
  }
  const auto n = static_cast<Eigen::Index>(cfg.count("data.n"));
  if (n < 1) throw ConfigError("data.n must be >= 1");
  return generate_data(model, theta_star, n, cfg.count("data.seed"));
}

/// Seeds derived from the root: one sub-root per named purpose.
inline std::uint64_t sub_seed(std::uint64_t root, std::uint64_t purpose) {
  return Rng::stream(root, purpose).engine()();
}

inline std::vector<std::uint64_t> chain_seeds(std::uint64_t root, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t c = 0; c < count; ++c) seeds[c] = Rng::stream(root, c).engine()();
  return seeds;
}

/// Runs body(i) for i in [0, count) on `threads` workers, round-robin.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Output directory handling and manifest bookkeeping for one run.
class OutputDir {
 public:
  OutputDir(const Config& cfg, const RunOptions& opts)
      : enabled_(opts.write_outputs), root_(cfg.text("run.out")), log_(opts.log),
        start_(std::chrono::steady_clock::now()), manifest_(make_manifest(cfg)) {
    if (enabled_) {
      if (root_.empty()) throw ConfigError("run.out must not be empty");
      std::error_code ec;
      std::filesystem::create_directories(root_, ec);
      if (ec) throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
    }
  }

  RunManifest& manifest() { return manifest_; }

  void log(const std::string& line) const {
    if (log_) *log_ << line << std::endl;
  }

  /// Writes a file under the output directory via `fill`, recording it in the manifest.
  void write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
    if (!enabled_) return;
    const auto path = root_ / name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << std::setprecision(17);
    fill(out);
    if (!out) throw IoError("write failed: " + path.string());
    manifest_.outputs.push_back(name);
  }

  template <typename T>
  void result(const std::string& key, const T& value) {
    std::ostringstream ss;
    ss << std::setprecision(17) << value;
    manifest_.results[key] = ss.str();
  }

  /// Stamps the duration and writes manifest.json.
  RunManifest finish() {
    manifest_.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (enabled_) write_manifest(root_ / "manifest.json", manifest_);
    return manifest_;
  }

 private:
  bool enabled_;
  std::filesystem::path root_;
  std::ostream* log_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

}  // namespace mhbt::experiments::internal
