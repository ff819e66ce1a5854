#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mhbt/mhbt.hpp"
#include "oracles.hpp"

using namespace mhbt;
using oracle::vec;

namespace {

ModelSpec<double> unit_gaussian(Eigen::Index d) { return GaussianMean<double>{d, 1.0, false}; }
ModelSpec<double> mixture() { return GaussianMixture2<double>{2.0, 10.0, 1.0}; }

SoftmaxMlp<double> small_mlp() {
  SoftmaxMlp<double> m;
  m.widths = {2, 5, 4};
  m.classes = 3;
  return m;
}

Vector<double> random_vector(Eigen::Index d, Rng& rng, double scale) {
  Vector<double> v(d);
  for (Eigen::Index j = 0; j < d; ++j) v(j) = scale * rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("model-core") {
  TEST_CASE("log_lik scalar examples") {
    const Vector<double> x0 = vec({0.0});
    CHECK(log_lik(unit_gaussian(1), vec({0.0}), x0) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-14));
    CHECK(log_lik(unit_gaussian(1), vec({0.0}), x0) == doctest::Approx(-0.9189385332).epsilon(1e-9));

    // both components coincide
    CHECK(log_lik(mixture(), vec({0.0, 0.0}), x0) == doctest::Approx(oracle::log_normal_pdf(0, 0, 2)).epsilon(1e-14));

    const double direct = static_cast<double>(
        std::log(0.5L * oracle::normal_pdf(1, 0, 2) + 0.5L * oracle::normal_pdf(1, 4, 2)));
    CHECK(log_lik(mixture(), vec({0.0, 4.0}), vec({1.0})) == doctest::Approx(direct).epsilon(1e-14));
  }

  TEST_CASE("grad_log_lik examples") {
    CHECK(grad_log_lik(unit_gaussian(1), vec({0.0}), vec({0.0}))(0) == 0.0);
    CHECK(grad_log_lik(unit_gaussian(1), vec({0.0}), vec({1.0}))(0) == 1.0);

    const auto model = mixture();
    const Vector<double> theta = vec({0.0, 4.0});
    const Vector<double> x = vec({1.0});
    const auto fd = oracle::central_difference([&](const Vector<double>& t) { return log_lik(model, t, x); }, theta);
    CHECK(oracle::relative_error(grad_log_lik(model, theta, x), fd) < 1e-5);
  }

  TEST_CASE("gradients match finite differences at 100 random points per family") {
    Rng rng(101);
    SUBCASE("gaussian-mean") {
      for (bool centered : {false, true}) {
        const ModelSpec<double> model = GaussianMean<double>{4, 1.7, centered};
        for (int k = 0; k < 100; ++k) {
          const Vector<double> theta = random_vector(4, rng, 3.0), x = random_vector(4, rng, 3.0);
          const auto fd = oracle::central_difference([&](const Vector<double>& t) { return log_lik(model, t, x); }, theta);
          CHECK(oracle::relative_error(grad_log_lik(model, theta, x), fd) < 1e-5);
        }
      }
    }
    SUBCASE("gaussian-mixture-2") {
      const auto model = mixture();
      for (int k = 0; k < 100; ++k) {
        const Vector<double> theta = random_vector(2, rng, 3.0), x = random_vector(1, rng, 4.0);
        const auto fd = oracle::central_difference([&](const Vector<double>& t) { return log_lik(model, t, x); }, theta);
        CHECK(oracle::relative_error(grad_log_lik(model, theta, x), fd) < 1e-5);
      }
    }
    SUBCASE("softmax-mlp") {
      const ModelSpec<double> model = small_mlp();
      const Eigen::Index d = param_dim(model);
      for (int k = 0; k < 100; ++k) {
        const Vector<double> theta = random_vector(d, rng, 1.0), x = random_vector(2, rng, 2.0);
        const int y = static_cast<int>(rng.index(3));
        const auto fd =
            oracle::central_difference([&](const Vector<double>& t) { return log_lik(model, t, x, y); }, theta);
        CHECK(oracle::relative_error(grad_log_lik(model, theta, x, y), fd) < 1e-5);
      }
    }
  }

  TEST_CASE("batch means") {
    const auto data = oracle::scalar_data({0.1, -0.2, 0.3, 0.0});
    const auto model = unit_gaussian(1);
    const Vector<double> theta = vec({0.0});

    CHECK(batch_mean_loglik(model, theta, data, BatchIndex({2}, 4)) == log_lik(model, theta, data, 2));
    CHECK(batch_mean_grad(model, theta, data, BatchIndex({3}, 4))(0) == grad_log_lik(model, theta, data, 3)(0));

    const double two = 0.5 * (oracle::log_normal_pdf(0.1, 0, 1) + oracle::log_normal_pdf(-0.2, 0, 1));
    CHECK(batch_mean_loglik(model, theta, data, BatchIndex({0, 1}, 4)) == doctest::Approx(two).epsilon(1e-14));

    double mu = 0;
    for (double x : {0.1, -0.2, 0.3, 0.0}) mu += oracle::log_normal_pdf(x, 0, 1) / 4;
    CHECK(batch_mean_loglik(model, theta, data, BatchIndex::full(4)) == doctest::Approx(mu).epsilon(1e-14));

    // closed form: mean(x_I) - theta
    const Vector<double> t = vec({0.7});
    CHECK(batch_mean_grad(model, t, data, BatchIndex({1, 2}, 4))(0) == doctest::Approx(0.05 - 0.7).epsilon(1e-14));
  }

  TEST_CASE("batch gradient matches finite differences of the batch mean") {
    Rng rng(7);
    const auto model = mixture();
    const auto data = generate_data(model, vec({0.0, 4.0}), 50, 3);
    const BatchIndex batch = sample_batch(50, 10, rng);
    const Vector<double> theta = vec({0.4, 3.1});
    const auto fd = oracle::central_difference(
        [&](const Vector<double>& t) { return batch_mean_loglik(model, t, data, batch); }, theta);
    CHECK(oracle::relative_error(batch_mean_grad(model, theta, data, batch), fd) < 1e-5);
  }

  TEST_CASE("Likelihood fast paths agree with the record-by-record definitions") {
    Rng rng(11);
    auto check = [&](const ModelSpec<double>& model, const Dataset<double>& data, const Vector<double>& theta) {
      const Likelihood<double> lik(model, data);
      const auto n = static_cast<std::size_t>(data.size());
      for (std::size_t m : {std::size_t{1}, n / 3, n}) {
        const BatchIndex b = m == n ? BatchIndex::full(n) : sample_batch(n, m, rng);
        const auto eval = lik.evaluate(theta, b, true);
        CHECK(eval.mean_loglik == doctest::Approx(batch_mean_loglik(model, theta, data, b)).epsilon(1e-12));
        CHECK((*eval.mean_grad - batch_mean_grad(model, theta, data, b)).cwiseAbs().maxCoeff() < 1e-11);
        CHECK_FALSE(lik.evaluate(theta, b, false).mean_grad.has_value());
      }
    };
    for (bool centered : {false, true}) {
      const ModelSpec<double> g = GaussianMean<double>{3, 0.8, centered};
      check(g, generate_data(g, vec({1, -1, 2}), 3000, 5), vec({0.5, 0.1, 1.9}));
    }
    check(mixture(), generate_data(mixture(), vec({0, 4}), 3000, 5), vec({0.2, 3.5}));
    const ModelSpec<double> mlp = small_mlp();
    const Vector<double> theta = random_vector(param_dim(mlp), rng, 1.0);
    check(mlp, generate_data(mlp, theta, 300, 5), random_vector(param_dim(mlp), rng, 1.0));
  }

  TEST_CASE("centered gaussian-mean drops only a theta-free term") {
    const ModelSpec<double> plain = GaussianMean<double>{2, 1.0, false}, centered = GaussianMean<double>{2, 1.0, true};
    const Vector<double> x = vec({0.3, -1.2});
    const double offset = log_lik(plain, vec({0, 0}), x) - log_lik(centered, vec({0, 0}), x);
    for (const auto& theta : {vec({1, 2}), vec({-3, 0.5}), vec({0.1, 0.1})})
      CHECK(log_lik(plain, theta, x) - log_lik(centered, theta, x) == doctest::Approx(offset).epsilon(1e-13));
  }

  TEST_CASE("mean over a disjoint partition equals the full-data mean") {
    Rng rng(21);
    const auto model = mixture();
    const auto data = generate_data(model, vec({0.0, 2.0}), 1200, 9);
    const Likelihood<double> lik(model, data);
    const Vector<double> theta = vec({0.3, 1.7});
    const double mu = lik.evaluate(theta, BatchIndex::full(1200), false).mean_loglik;
    for (std::size_t m : {100, 300, 400}) {
      std::vector<BatchIndex::value_type> perm(1200);
      std::iota(perm.begin(), perm.end(), 0u);
      std::shuffle(perm.begin(), perm.end(), rng.engine());
      double avg = 0;
      for (std::size_t start = 0; start < 1200; start += m) {
        std::vector<BatchIndex::value_type> part(perm.begin() + static_cast<long>(start),
                                                 perm.begin() + static_cast<long>(start + m));
        avg += lik.evaluate(theta, BatchIndex(part, 1200), false).mean_loglik;
      }
      avg /= static_cast<double>(1200 / m);
      CHECK(std::abs(avg - mu) < 1e-12);
    }
  }

  TEST_CASE("mixture likelihood is symmetric under label swap") {
    Rng rng(5);
    const auto model = mixture();
    for (int k = 0; k < 200; ++k) {
      const Vector<double> theta = random_vector(2, rng, 5.0), x = random_vector(1, rng, 6.0);
      const Vector<double> swapped = vec({theta(0) + theta(1), -theta(1)});
      CHECK(std::abs(log_lik(model, theta, x) - log_lik(model, swapped, x)) < 1e-12);
    }
  }

  TEST_CASE("log_lik stays finite at extreme parameters") {
    const Vector<double> far = vec({1e3, -2e3});
    CHECK(std::isfinite(log_lik(mixture(), far, vec({0.0}))));
    CHECK(std::isfinite(log_lik(mixture(), far, vec({5e3}))));
    const auto mlp = small_mlp();
    const Vector<double> big = Vector<double>::Constant(mlp.param_dim(), 300.0);
    for (int y = 0; y < 3; ++y) CHECK(std::isfinite(log_lik(ModelSpec<double>(mlp), big, vec({50, -50}), y)));
  }

  TEST_CASE("generate_data") {
    SUBCASE("determinism") {
      CHECK(generate_data(mixture(), vec({0, 4}), 500, 17) == generate_data(mixture(), vec({0, 4}), 500, 17));
      CHECK_FALSE(generate_data(mixture(), vec({0, 4}), 500, 17) == generate_data(mixture(), vec({0, 4}), 500, 18));
    }
    SUBCASE("gaussian-mean sample mean") {
      const auto data = generate_data(unit_gaussian(2), vec({2, 2}), 100000, 1);
      const Eigen::RowVectorXd mean = data.features().colwise().mean();
      CHECK(std::abs(mean(0) - 2) < 0.02);
      CHECK(std::abs(mean(1) - 2) < 0.02);
    }
    SUBCASE("mixture sample mean") {
      const auto data = generate_data(mixture(), vec({0, 4}), 100000, 1);
      CHECK(std::abs(data.features().mean() - 2) < 0.05);
    }
    SUBCASE("softmax labels lie in range") {
      const ModelSpec<double> mlp = small_mlp();
      Rng rng(3);
      const auto data = generate_data(mlp, random_vector(param_dim(mlp), rng, 1.0), 400, 2);
      CHECK(data.has_labels());
      CHECK(data.label_count() <= 3);
    }
  }

  TEST_CASE("contract and configuration errors") {
    CHECK_THROWS_AS(log_lik(unit_gaussian(2), vec({0.0}), vec({0.0, 0.0})), ContractViolation);
    CHECK_THROWS_WITH(log_lik(unit_gaussian(2), vec({0.0}), vec({0.0, 0.0})),
                      doctest::Contains("expected size 2, got 1"));
    CHECK_THROWS_AS(log_lik(unit_gaussian(2), vec({0.0, 0.0}), vec({0.0})), ContractViolation);
    CHECK_THROWS_AS(BatchIndex({4}, 4), ContractViolation);
    CHECK_THROWS_AS(BatchIndex({1, 1}, 4), ContractViolation);
    const auto data = oracle::scalar_data({0.1, 0.2});
    const Likelihood<double> lik(unit_gaussian(1), data);
    CHECK_THROWS_AS(lik.evaluate(vec({0.0}), BatchIndex({0, 1, 2}, 3), false), ContractViolation);
    CHECK_THROWS_AS(validate(ModelSpec<double>(GaussianMean<double>{1, -1.0, false})), ConfigError);
    CHECK_THROWS_AS(validate(ModelSpec<double>(GaussianMixture2<double>{0.0, 1.0, 1.0})), ConfigError);
    CHECK_THROWS_AS(generate_data(ModelSpec<double>(GaussianMean<double>{0, 1.0, false}), Vector<double>(), 3, 1),
                    ConfigError);
    CHECK_THROWS_AS(Likelihood<double>(ModelSpec<double>(small_mlp()), data), ContractViolation);
  }

  TEST_CASE("dataset CSV round-trips exactly") {
    Rng rng(9);
    const ModelSpec<double> mlp = small_mlp();
    const auto data = generate_data(mlp, random_vector(param_dim(mlp), rng, 1.0), 50, 4);
    std::stringstream ss;
    write_csv(ss, data);
    CHECK(ss.str().rfind("x0,x1,label\n", 0) == 0);
    CHECK(read_csv<double>(ss) == data);

    const auto plain = generate_data(unit_gaussian(3), vec({1, 2, 3}), 20, 4);
    std::stringstream s2;
    write_csv(s2, plain);
    CHECK(read_csv<double>(s2) == plain);

    std::stringstream bad("x0,x1\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv<double>(bad), IoError);
  }
}
