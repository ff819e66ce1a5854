#include "mhbt/experiments/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mhbt/error.hpp"

namespace mhbt::experiments {

namespace {

using Table = std::vector<KeyInfo>;

Table run_keys(const std::string& out, const std::string& chains_note, const std::string& chains) {
  Table t = {
      {"run.seed", "1", "root seed; every stream derives from it"},
      {"run.threads", "1", "worker threads; outputs do not depend on it"},
      {"run.out", out, "output directory"},
  };
  if (!chains.empty()) t.push_back({"run.chains", chains, chains_note});
  return t;
}

Table tune_keys() {
  return {
      {"tune.target", "0.3", "target mean acceptance of the random walk (published protocol: around 0.3)"},
      {"tune.tolerance", "0.05", "accepted band around the target"},
      {"tune.pilot_iterations", "2000", "length of each pilot run"},
      {"tune.max_steps", "20", "bisection steps on log delta"},
      {"tune.lo", "1e-8", "lower end of the delta bracket"},
      {"tune.hi", "100", "upper end of the delta bracket"},
      {"tune.theta", "", "pilot starting point; empty uses the experiment's reference point"},
  };
}

Table join(std::initializer_list<Table> parts) {
  Table out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const Table& gaussian_convergence_table() {
  static const Table t = join({
      run_keys("results/gaussian-convergence",
               "independent chains per sampler (desk-scale substitution: published runs used 1e5)", "10000"),
      {
          {"run.iterations", "400", "steps per chain"},
          {"run.theta0", "0", "starting point, scalar broadcast or list"},
          {"model.dim", "2", "dimension d (published: 2 and 5)"},
          {"data.n", "100000", "records (published: n = 1e5)"},
          {"data.theta_star", "2", "generating mean, scalar broadcast or list (published: every coordinate 2)"},
          {"data.seed", "11", "data generation seed"},
          {"data.path", "", "optional dataset CSV used instead of generation"},
          {"temper.m", "1000", "batch size (published: 1000)"},
          {"temper.c_n", "20", "scaling constant (published: 20; 5 to 30 reported similar)"},
          {"proposal.delta", "0", "random-walk step; 0 tunes it to tune.target"},
      },
      tune_keys(),
      {
          {"tv.bins", "20", "histogram bins per dimension"},
          {"tv.checkpoints", "16", "number of log-spaced TV checkpoints"},
          {"tv.reference_samples", "0", "exact tempered-posterior draws; 0 uses run.chains"},
          {"full_batch.enabled", "true", "also run full-batch MH on the tempered posterior with the same delta"},
      },
  });
  return t;
}

const Table& mixture_table() {
  static const Table t = join({
      run_keys("results/mixture-traveling", "independent MHBT / full-batch chain pairs", "1"),
      {
          {"run.iterations", "100000", "MHBT steps"},
          {"run.thin", "10", "trajectory thinning"},
          {"run.theta0", "", "starting point; empty uses data.theta_star"},
          {"model.sigma_x_sq", "2", "component variance (published: 2)"},
          {"model.sigma1_sq", "10", "prior variance of theta_1, reference posterior only (published: 10)"},
          {"model.sigma2_sq", "1", "prior variance of theta_2, reference posterior only (published: 1)"},
          {"data.n", "100000", "records (published: n = 1e5)"},
          {"data.theta_star", "0,4", "generating (theta_1, theta_2) (published: theta_1 = 0, theta_2 in 0.5, 2, 4)"},
          {"data.seed", "13", "data generation seed"},
          {"data.path", "", "optional dataset CSV used instead of generation"},
          {"temper.m", "1000", "batch size (published: 1000)"},
          {"temper.c_n", "20", "scaling constant (published: 20; 5 to 30 reported similar)"},
          {"proposal.delta", "0", "MHBT random-walk step; 0 tunes it"},
          {"full_batch.enabled", "true", "run the untempered full-batch chain"},
          {"full_batch.delta", "0", "full-batch random-walk step; 0 tunes it"},
          {"full_batch.iterations", "100000", "full-batch steps"},
      },
      tune_keys(),
      {
          {"mixture.radius_fraction", "0.4", "mode-ball radius as a fraction of the distance between the two modes"},
          {"mixture.grid_bins", "20", "bins per dimension of the density-argmax comparison grid"},
      },
  });
  return t;
}

const Table& scaling_table() {
  static const Table t = join({
      run_keys("results/acceptance-scaling", "independent chains averaged per cell", "1"),
      {
          {"run.iterations", "2000", "averaging window from the start (published: first 2000 iterations)"},
          {"model.variance", "1", "target N(0, variance I_d)"},
          {"model.centered", "true", "drop the record-only term of the Gaussian log-likelihood"},
          {"data.n", "10000", "records (published: n = 1e4)"},
          {"data.seed", "17", "data generation seed"},
          {"temper.m", "1000", "batch size (published: 1000)"},
          {"temper.c_n", "20", "scaling constant (published: 20)"},
          {"scaling.dims", "10,100,1000", "dimensions swept (published: 10, 1e2, 1e3)"},
          {"scaling.betas", "1,2", "RSGLD beta values compared with SGLD (published: 1 and 2)"},
          {"scaling.eps_per_decade", "8", "grid density in points per decade"},
          {"scaling.eps_low", "-4", "grid start, decades relative to d^(-1/4)/n"},
          {"scaling.eps_high", "2", "grid end, decades relative to d^(-1/4)/n"},
      },
  });
  return t;
}

const Table& toy_nn_table() {
  static const Table t = join({
      run_keys("results/toy-nn", "independent training rounds", "1"),
      {
          {"run.epochs", "200", "epochs of ceil(n/m) iterations"},
          {"model.widths", "2,16", "input width then hidden widths"},
          {"model.classes", "3", "output classes"},
          {"data.n", "3000", "training records"},
          {"data.test_n", "1000", "test records"},
          {"data.seed", "19", "data generation seed"},
          {"data.radius", "3", "distance of cluster centers from the origin"},
          {"data.spread", "0.5", "per-coordinate standard deviation within a cluster"},
          {"temper.m", "100", "batch size (published: 100)"},
          {"temper.c_n", "100", "scaling constant (published: 100)"},
          {"proposal.epsilon", "0.5", "learning rate shared by RSGLD, SGD and SGLD"},
          {"proposal.beta", "2", "initial beta"},
          {"init.sd", "0.1", "standard deviation of the N(0, sd^2) initial weights"},
          {"beta.trigger_accept", "0.4", "epoch acceptance that opens a decrease phase (published: 0.4)"},
          {"beta.probe_steps", "100", "forward probes per check (published: 100)"},
          {"beta.decrease_threshold", "0.7", "probe acceptance above which beta shrinks (published: 0.7)"},
          {"beta.decrease_factor", "0.95", "shrink factor (published: 5%)"},
          {"beta.increase_threshold", "0.2", "epoch acceptance below which beta grows (published: 0.2)"},
          {"beta.increase_factor", "1.05", "growth factor (published: 5%)"},
          {"beta.max_phase_reduction", "0.5", "largest reduction within one phase (published: 50%)"},
          {"baselines.enabled", "true", "also train with SGD and SGLD"},
      },
  });
  return t;
}

const Table& tune_table() {
  static const Table t = join({
      run_keys("results/tune-delta", "", ""),
      {
          {"model.family", "gaussian-mean", "gaussian-mean or gaussian-mixture-2"},
          {"model.dim", "2", "gaussian-mean dimension"},
          {"model.variance", "1", "gaussian-mean per-coordinate variance"},
          {"model.centered", "false", "gaussian-mean: drop the record-only term"},
          {"model.sigma_x_sq", "2", "mixture component variance"},
          {"model.sigma1_sq", "10", "mixture prior variance of theta_1"},
          {"model.sigma2_sq", "1", "mixture prior variance of theta_2"},
          {"data.n", "100000", "records"},
          {"data.theta_star", "2", "generating parameter, scalar broadcast or list"},
          {"data.seed", "11", "data generation seed"},
          {"data.path", "", "optional dataset CSV used instead of generation"},
          {"temper.m", "1000", "batch size"},
          {"temper.c_n", "20", "scaling constant"},
      },
      tune_keys(),
  });
  return t;
}

const Table& oracle_table() {
  static const Table t = join({
      run_keys("results/oracle-check", "", ""),
      {
          {"oracle.ns", "3,4", "dataset sizes"},
          {"oracle.ms", "1,2,n", "batch sizes; n means the full dataset"},
          {"oracle.cns", "1,2,n", "scaling constants; n means c_n = n"},
          {"oracle.grids", "3,4,5,6,7", "grid sizes"},
          {"oracle.grid_halfwidth", "1", "grid spans the sample mean +- this"},
          {"oracle.max_abs_tol", "1e-10", "stationary vector agreement"},
          {"oracle.balance_tol", "1e-12", "detailed balance agreement"},
          {"data.theta_star", "0.3", "generating mean"},
          {"data.seed", "23", "data generation seed"},
      },
  });
  return t;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

std::int64_t parse_integer(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
  return v;
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::gaussian_convergence: return "gaussian-convergence";
    case Experiment::mixture_traveling: return "mixture-traveling";
    case Experiment::acceptance_scaling: return "acceptance-scaling";
    case Experiment::toy_nn: return "toy-nn";
    case Experiment::tune_delta: return "tune-delta";
    default: return "oracle-check";
  }
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> all = {
      Experiment::gaussian_convergence, Experiment::mixture_traveling, Experiment::acceptance_scaling,
      Experiment::toy_nn,               Experiment::tune_delta,        Experiment::oracle_check,
  };
  return all;
}

Experiment parse_experiment(const std::string& name) {
  for (auto e : all_experiments())
    if (to_string(e) == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

const std::vector<KeyInfo>& key_table(Experiment e) {
  switch (e) {
    case Experiment::gaussian_convergence: return gaussian_convergence_table();
    case Experiment::mixture_traveling: return mixture_table();
    case Experiment::acceptance_scaling: return scaling_table();
    case Experiment::toy_nn: return toy_nn_table();
    case Experiment::tune_delta: return tune_table();
    default: return oracle_table();
  }
}

bool is_execution_only_key(const std::string& key) { return key == "run.out" || key == "run.threads"; }

Config Config::defaults(Experiment e) {
  Config c(e);
  for (const auto& k : key_table(e)) c.values_[k.key] = k.value;
  return c;
}

Config Config::from_ini(Experiment e, std::istream& in, const std::string& origin) {
  Config c = defaults(e);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& err) {
    throw ConfigError(origin + ": " + err.message() + " (line " + std::to_string(err.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) throw ConfigError(origin + ": key '" + section + "' is outside any section");
      continue;
    }
    for (const auto& [name, leaf] : body) {
      const std::string key = section + "." + name;
      if (!c.has(key)) throw ConfigError(origin + ": unknown key '" + key + "' for " + to_string(e));
      c.values_[key] = trim(leaf.get_value<std::string>());
    }
  }
  return c;
}

Config Config::from_file(Experiment e, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  return from_ini(e, in, path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!has(key)) throw ConfigError("unknown key '" + key + "' for " + to_string(experiment_));
  values_[key] = value;
}

const std::string& Config::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "' for " + to_string(experiment_));
  return it->second;
}

double Config::real(const std::string& key) const { return parse_real(key, text(key)); }

std::int64_t Config::integer(const std::string& key) const { return parse_integer(key, text(key)); }

std::uint64_t Config::count(const std::string& key) const {
  const auto v = integer(key);
  if (v < 0) throw ConfigError("config key '" + key + "': must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool Config::flag(const std::string& key) const {
  const auto& s = text(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + s + "'");
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(text(key))) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::uint64_t> Config::counts(const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text(key))) {
    const auto v = parse_integer(key, item);
    if (v < 0) throw ConfigError("config key '" + key + "': entries must be non-negative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  feed(to_string(experiment_));
  feed("\n");
  for (const auto& [k, v] : values_) {
    if (is_execution_only_key(k)) continue;
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Config::write_ini(std::ostream& out, bool annotate) const {
  std::string section;
  for (const auto& info : key_table(experiment_)) {
    const auto dot = info.key.find('.');
    const std::string sec = info.key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    if (annotate) out << "; " << info.note << '\n';
    out << info.key.substr(dot + 1) << " = " << values_.at(info.key) << '\n';
  }
}

}  // namespace mhbt::experiments
