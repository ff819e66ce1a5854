#include <cmath>
#include <numbers>

#include "common.hpp"

namespace mhbt::experiments {

double ToyNnResult::forward_rate() const { return AcceptanceWindow::ratio(forward_accepted, forward_proposed); }
double ToyNnResult::backward_rate() const { return AcceptanceWindow::ratio(backward_accepted, backward_proposed); }

Dataset<double> cluster_data(std::size_t n, double radius, double spread, std::uint64_t seed) {
  if (n < 1) throw ConfigError("cluster_data: n must be >= 1");
  if (!(radius > 0) || !(spread > 0)) throw ConfigError("cluster_data: radius and spread must be positive");
  Rng rng(seed);
  RowMatrix<double> x(static_cast<Eigen::Index>(n), 2);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.index(3));
    const double angle = 2 * std::numbers::pi * c / 3;
    x(static_cast<Eigen::Index>(i), 0) = radius * std::cos(angle) + spread * rng.normal();
    x(static_cast<Eigen::Index>(i), 1) = radius * std::sin(angle) + spread * rng.normal();
    labels[i] = c;
  }
  return Dataset<double>(std::move(x), std::move(labels));
}

namespace {

enum class Method { rsgld, sgd, sgld };

const char* name(Method m) {
  switch (m) {
    case Method::rsgld: return "rsgld";
    case Method::sgd: return "sgd";
    default: return "sgld";
  }
}

double error_rate(const SoftmaxMlp<double>& mlp, const Vector<double>& theta, const Dataset<double>& data) {
  const SoftmaxMlp<double>::ColMatrix inputs = data.features();
  const auto logits = mlp.forward(theta, inputs).back();
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    wrong += arg != data.label(i);
  }
  return static_cast<double>(wrong) / static_cast<double>(logits.rows());
}

struct BetaStep {
  std::uint64_t round = 0, epoch = 0;
  double beta = 1;
};

struct RoundOutput {
  std::vector<EpochRow> rows;
  std::vector<BetaStep> betas;
  std::uint64_t fwd = 0, fwd_acc = 0, bwd = 0, bwd_acc = 0;
};

struct Setup {
  const Likelihood<double>* lik;
  const SoftmaxMlp<double>* mlp;
  const Dataset<double>* train;
  const Dataset<double>* test;
  TemperSpec spec;
  double epsilon;
  BetaSchedule schedule;
  std::uint64_t epochs;
  double init_sd;
};

RoundOutput train(const Setup& s, Method method, std::uint64_t round, std::uint64_t seed) {
  RoundOutput out;
  Rng init_rng = Rng::stream(seed, 2);
  Vector<double> theta0(s.lik->param_dim());
  for (Eigen::Index j = 0; j < theta0.size(); ++j) theta0(j) = s.init_sd * init_rng.normal();
  const std::uint64_t per_epoch = (s.spec.n + s.spec.m - 1) / s.spec.m;
  const double n = static_cast<double>(s.spec.n);

  auto push = [&](std::uint64_t epoch, const Vector<double>& theta, const AcceptanceWindow& w, double beta) {
    EpochRow row;
    row.method = name(method);
    row.round = round;
    row.epoch = epoch;
    row.train_error = error_rate(*s.mlp, theta, *s.train);
    row.test_error = error_rate(*s.mlp, theta, *s.test);
    row.accept_rate = w.accept_rate();
    row.forward_rate = w.forward_rate();
    row.backward_rate = w.backward_rate();
    row.beta = beta;
    out.rows.push_back(row);
  };

  if (method == Method::sgd) {
    Rng rng = Rng::stream(seed, 3);
    BatchSampler sampler(s.spec.n, s.spec.m);
    BatchIndex batch;
    Vector<double> theta = theta0;
    for (std::uint64_t e = 1; e <= s.epochs; ++e) {
      AcceptanceWindow w;
      for (std::uint64_t t = 0; t < per_epoch; ++t) {
        sampler.draw(rng, batch);
        theta += s.epsilon * *s.lik->evaluate(theta, batch, true).mean_grad;
        w.add(StepRecord<double>{{}, {}, Direction::forward, 0, 0, true});
      }
      push(e, theta, w, 1.0);
    }
    return out;
  }

  const bool mh = method == Method::rsgld;
  BetaSchedule sched = s.schedule;
  const Proposal p = mh ? Proposal::rsgld(s.epsilon, sched.current_beta, n) : Proposal::sgld(s.epsilon, n);
  MhbtKernel<double> kernel(*s.lik, s.spec, p, mh ? KernelMode::metropolis : KernelMode::unadjusted);
  Rng rng(seed);
  Rng probe_rng = Rng::stream(seed, mh ? 1 : 4);
  auto state = kernel.initial_state(theta0, rng);
  StepRecord<double> rec;
  for (std::uint64_t e = 1; e <= s.epochs; ++e) {
    AcceptanceWindow w;
    w.beta = sched.current_beta;
    for (std::uint64_t t = 0; t < per_epoch; ++t) {
      kernel.step_into(state, rng, rec);
      w.add(rec);
    }
    out.fwd += w.forward;
    out.fwd_acc += w.forward_accepted;
    out.bwd += w.backward;
    out.bwd_acc += w.backward_accepted;
    if (mh) {
      if (!state.cached_grad) kernel.refresh(state);
      auto probe = [&](double beta) { return forward_probe(kernel, state, beta, sched.probe_steps, probe_rng); };
      sched = update_beta(sched, w.accept_rate(), probe);
      kernel.proposal().langevin.beta = sched.current_beta;
      out.betas.push_back({round, e, sched.current_beta});
    }
    push(e, state.theta, w, mh ? sched.current_beta : 1.0);
  }
  return out;
}

}  // namespace

ToyNnResult run_toy_nn(const Config& cfg, const RunOptions& opts) {
  const std::size_t rounds = cfg.count("run.chains");
  const std::uint64_t epochs = cfg.count("run.epochs");
  const std::size_t threads = cfg.count("run.threads");
  if (rounds < 1 || epochs < 1) throw ConfigError("run.chains and run.epochs must be >= 1");
  SoftmaxMlp<double> mlp;
  mlp.widths.clear();
  for (auto w : cfg.counts("model.widths")) mlp.widths.push_back(static_cast<Eigen::Index>(w));
  mlp.classes = static_cast<Eigen::Index>(cfg.count("model.classes"));
  if (mlp.widths.empty() || mlp.widths.front() != 2) throw ConfigError("model.widths: the input width must be 2");
  if (mlp.classes != 3) throw ConfigError("model.classes must be 3 for the cluster data");
  const ModelSpec<double> model = mlp;
  validate(model);

  Setup s{};
  s.epsilon = cfg.real("proposal.epsilon");
  s.init_sd = cfg.real("init.sd");
  s.epochs = epochs;
  if (!(s.epsilon > 0)) throw ConfigError("proposal.epsilon must be positive");
  if (!(s.init_sd >= 0)) throw ConfigError("init.sd must be >= 0");
  auto& b = s.schedule;
  b.trigger_accept = cfg.real("beta.trigger_accept");
  b.probe_steps = static_cast<int>(cfg.integer("beta.probe_steps"));
  b.decrease_threshold = cfg.real("beta.decrease_threshold");
  b.decrease_factor = cfg.real("beta.decrease_factor");
  b.increase_threshold = cfg.real("beta.increase_threshold");
  b.increase_factor = cfg.real("beta.increase_factor");
  b.max_phase_reduction = cfg.real("beta.max_phase_reduction");
  b.current_beta = b.phase_start_beta = cfg.real("proposal.beta");
  b.validate();

  const double radius = cfg.real("data.radius"), spread = cfg.real("data.spread");
  const std::uint64_t data_seed = cfg.count("data.seed");
  const auto train_data = cluster_data(cfg.count("data.n"), radius, spread, data_seed);
  const auto test_data = cluster_data(cfg.count("data.test_n"), radius, spread, internal::sub_seed(data_seed, 1));
  const Likelihood<double> lik(model, train_data);
  s.lik = &lik;
  s.mlp = &mlp;
  s.train = &train_data;
  s.test = &test_data;
  s.spec = {static_cast<std::size_t>(train_data.size()), cfg.count("temper.m"), cfg.real("temper.c_n")};
  s.spec.validate();
  internal::OutputDir out(cfg, opts);
  out.manifest().substitutions.push_back(
      "toy softmax MLP on synthetic 3-cluster data replaces the published MNIST and CIFAR-10 networks");

  std::vector<Method> methods{Method::rsgld};
  if (cfg.flag("baselines.enabled")) methods.insert(methods.end(), {Method::sgd, Method::sgld});
  const auto seeds = internal::chain_seeds(cfg.count("run.seed"), rounds);
  out.manifest().chain_seeds = seeds;
  out.log("toy-nn: " + std::to_string(rounds) + " round(s), " + std::to_string(epochs) + " epochs, d = " +
          std::to_string(lik.param_dim()));

  std::vector<RoundOutput> outputs(rounds * methods.size());
  internal::parallel_for(outputs.size(), threads, [&](std::size_t job) {
    const std::size_t r = job / methods.size();
    outputs[job] = train(s, methods[job % methods.size()], r, seeds[r]);
  });

  ToyNnResult res;
  std::vector<BetaStep> betas;
  for (std::size_t job = 0; job < outputs.size(); ++job) {
    const auto& o = outputs[job];
    res.rows.insert(res.rows.end(), o.rows.begin(), o.rows.end());
    betas.insert(betas.end(), o.betas.begin(), o.betas.end());
    if (methods[job % methods.size()] != Method::rsgld) continue;
    res.forward_proposed += o.fwd;
    res.forward_accepted += o.fwd_acc;
    res.backward_proposed += o.bwd;
    res.backward_accepted += o.bwd_acc;
    if (job == 0) {
      res.final_beta = o.rows.back().beta;
      res.final_train_error = o.rows.back().train_error;
      for (const auto& row : o.rows) {
        if (row.train_error <= 0.05) {
          res.first_epoch_below_5pct = static_cast<std::int64_t>(row.epoch);
          break;
        }
      }
    }
  }

  out.write("epochs.csv", [&](std::ostream& os) {
    os << "method,round,epoch,train_error,test_error,accept_rate,forward_rate,backward_rate,beta\n";
    for (const auto& r : res.rows)
      os << r.method << ',' << r.round << ',' << r.epoch << ',' << r.train_error << ',' << r.test_error << ','
         << r.accept_rate << ',' << r.forward_rate << ',' << r.backward_rate << ',' << r.beta << '\n';
  });
  out.write("beta_trace.csv", [&](std::ostream& os) {
    os << "round,epoch,beta\n";
    for (const auto& bs : betas) os << bs.round << ',' << bs.epoch << ',' << bs.beta << '\n';
  });
  out.result("final_beta", res.final_beta);
  out.result("final_train_error", res.final_train_error);
  out.result("first_epoch_below_5pct", res.first_epoch_below_5pct);
  out.result("forward_rate", res.forward_rate());
  out.result("backward_rate", res.backward_rate());
  res.manifest = out.finish();
  return res;
}

}  // namespace mhbt::experiments
