#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mhbt::experiments {

enum class Experiment {
  gaussian_convergence,
  mixture_traveling,
  acceptance_scaling,
  toy_nn,
  tune_delta,
  oracle_check,
};

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& name);
const std::vector<Experiment>& all_experiments();

/// One recognized key with its default value and an annotation for the default-config file.
struct KeyInfo {
  std::string key;    ///< "section.name"
  std::string value;  ///< default, as text
  std::string note;
};

/// Recognized keys of an experiment, in file order.
const std::vector<KeyInfo>& key_table(Experiment e);

/// Fully resolved flat configuration: every recognized key holds a value, defaults
/// included. Keys are "section.name".
class Config {
 public:
  static Config defaults(Experiment e);

  /// Parses INI text over the defaults; unknown sections or keys raise ConfigError.
  static Config from_ini(Experiment e, std::istream& in, const std::string& origin = "<config>");
  static Config from_file(Experiment e, const std::filesystem::path& path);

  Experiment experiment() const { return experiment_; }
  const std::map<std::string, std::string>& values() const { return values_; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  const std::string& text(const std::string& key) const;

  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::uint64_t> counts(const std::string& key) const;

  /// FNV-1a over the canonical key=value listing, excluding keys that cannot change
  /// results (output directory and thread count).
  std::string hash() const;

  /// Annotated INI listing of every key in table order.
  void write_ini(std::ostream& out, bool annotate = true) const;

 private:
  explicit Config(Experiment e) : experiment_(e) {}
  Experiment experiment_;
  std::map<std::string, std::string> values_;
};

/// Keys excluded from Config::hash().
bool is_execution_only_key(const std::string& key);

}  // namespace mhbt::experiments
