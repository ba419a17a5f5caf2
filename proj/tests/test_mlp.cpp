#include <doctest.h>

#include "cann/error.hpp"
#include "cann/mlp.hpp"
#include "cann/simd/kernels.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace cann::mlp;

namespace {

MlpNet random_net(std::vector<std::size_t> sizes, std::vector<Activation> acts, std::uint64_t seed,
                  double bias_range = 0.3) {
  MlpNet net(std::move(sizes), std::move(acts));
  net.init_uniform(0.8, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> d(-bias_range, bias_range);
  for (std::size_t l = 0; l < net.n_layers(); ++l)
    for (double& b : net.biases(l))
      b = d(rng);
  return net;
}

// Central differences, independent of the analytic chain rule.
std::vector<double> fd_jacobian(const MlpNet& net, std::vector<double> x, double h) {
  const std::size_t n_in = net.n_inputs(), n_out = net.n_outputs();
  std::vector<double> jac(n_out * n_in);
  for (std::size_t j = 0; j < n_in; ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    auto fp = net.forward(x);
    x[j] = x0 - h;
    auto fm = net.forward(x);
    x[j] = x0;
    for (std::size_t i = 0; i < n_out; ++i)
      jac[i * n_in + j] = (fp[i] - fm[i]) / (2.0 * h);
  }
  return jac;
}

} // namespace

TEST_CASE("construction validates shapes") {
  CHECK_THROWS_AS(MlpNet({3}, {}), cann::ConfigError);
  CHECK_THROWS_AS(MlpNet({3, 6, 3}, {Activation::tanh}), cann::ConfigError);
  MlpNet net({3, 6, 6, 3}, {Activation::tanh, Activation::tanh, Activation::tanh});
  CHECK(net.n_params() == 3 * 6 + 6 + 6 * 6 + 6 + 6 * 3 + 3);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), cann::ConfigError);
}

TEST_CASE("forward: zero input through zero-bias tanh net gives zero") {
  MlpNet net({3, 6, 6, 3}, {Activation::tanh, Activation::tanh, Activation::tanh});
  net.init_uniform(0.2, 5);
  auto y = net.forward(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : y)
    CHECK(v == 0.0);
}

TEST_CASE("forward: identity linear layer") {
  MlpNet net({3, 3}, {Activation::linear});
  auto w = net.weights(0);
  w[0] = w[4] = w[8] = 1.0;
  auto y = net.forward(std::vector<double>{0.3, -1.5, 2.0});
  CHECK(y[0] == 0.3);
  CHECK(y[1] == -1.5);
  CHECK(y[2] == 2.0);
}

TEST_CASE("forward: single tanh node") {
  MlpNet net({1, 1}, {Activation::tanh});
  net.weights(0)[0] = 1.0;
  auto y = net.forward(std::vector<double>{0.5});
  CHECK(y[0] == doctest::Approx(0.46211715726000974).epsilon(1e-15));
}

TEST_CASE("jacobian: linear net equals weight product") {
  auto net = random_net({3, 4, 2}, {Activation::linear, Activation::linear}, 3);
  auto jac = net.jacobian(std::vector<double>{0.1, 0.2, 0.3});
  auto w0 = net.weights(0);
  auto w1 = net.weights(1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k)
        s += w1[i * 4 + k] * w0[k * 3 + j];
      CHECK(jac[i * 3 + j] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("jacobian: scalar tanh net at zero equals w") {
  MlpNet net({1, 1}, {Activation::tanh});
  net.weights(0)[0] = 0.37;
  CHECK(net.jacobian(std::vector<double>{0.0})[0] == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("jacobian matches central finite differences") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto net = random_net({3, 6, 6, 3}, {Activation::tanh, Activation::tanh, Activation::tanh}, seed);
    auto sn = random_net({2, 7, 7, 3}, {Activation::logistic, Activation::tanh, Activation::logistic}, seed + 100);
    for (auto* n : {&net, &sn}) {
      std::vector<double> x(n->n_inputs());
      for (double& v : x)
        v = u(rng);
      auto jac = n->jacobian(x);
      auto fd = fd_jacobian(*n, x, 1e-6);
      for (std::size_t i = 0; i < jac.size(); ++i)
        CHECK(std::abs(jac[i] - fd[i]) < 1e-6);

      // Directional derivative consistency.
      std::vector<double> dir(n->n_inputs());
      for (double& v : dir)
        v = u(rng);
      const double h = 1e-6;
      std::vector<double> xp = x, xm = x;
      for (std::size_t j = 0; j < x.size(); ++j) {
        xp[j] += h * dir[j];
        xm[j] -= h * dir[j];
      }
      auto fp = n->forward(xp), fm = n->forward(xm);
      for (std::size_t i = 0; i < n->n_outputs(); ++i) {
        double jd = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
          jd += jac[i * x.size() + j] * dir[j];
        const double fdd = (fp[i] - fm[i]) / (2 * h);
        CHECK(std::abs(jd - fdd) <= 1e-5 * std::max(std::abs(jd), 1e-3));
      }
    }
  }
}

TEST_CASE("forward_batch agrees with per-sample forward") {
  auto net = random_net({2, 25, 25, 3}, {Activation::logistic, Activation::tanh, Activation::logistic}, 8);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t n = 37;
  std::vector<double> xs(n * 2);
  for (double& v : xs)
    v = u(rng);
  auto ys = net.forward_batch(xs, n);
  for (std::size_t s = 0; s < n; ++s) {
    auto y = net.forward(std::span<const double>(xs).subspan(s * 2, 2));
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(ys[s * 3 + i] == doctest::Approx(y[i]).epsilon(1e-13));
  }
}

TEST_CASE("He initialization variance") {
  MlpNet net({25, 200, 3}, {Activation::tanh, Activation::linear});
  net.init_he(77);
  auto w = net.weights(0);
  double mean = 0.0, var = 0.0;
  for (double v : w)
    mean += v;
  mean /= static_cast<double>(w.size());
  for (double v : w)
    var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  CHECK(w.size() >= 1000);
  CHECK(std::abs(var - 2.0 / 25.0) < 0.2 * (2.0 / 25.0));
}

TEST_CASE("uniform initialization stays in range with zero biases") {
  MlpNet net({3, 6, 6, 3}, {Activation::tanh, Activation::tanh, Activation::tanh});
  net.init_uniform(0.2, 11);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    for (double w : net.weights(l))
      CHECK(std::abs(w) <= 0.2);
    for (double b : net.biases(l))
      CHECK(b == 0.0);
  }
}

TEST_CASE("train: zero epochs leaves the net unchanged") {
  auto net = random_net({2, 3, 1}, {Activation::tanh, Activation::linear}, 4);
  const auto before = net;
  Dataset d(2, 1);
  d.add(std::vector<double>{0.1, 0.2}, std::vector<double>{0.5});
  TrainConfig cfg;
  cfg.epochs = 0;
  auto r = train(net, d, cfg);
  CHECK(r.loss_trace.empty());
  CHECK(net == before);
}

TEST_CASE("train: linear regression recovers the least-squares line") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  Dataset d(1, 1);
  std::vector<double> xs, ys;
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng);
    const double y = 0.8 * x - 0.3 + noise(rng);
    xs.push_back(x);
    ys.push_back(y);
    d.add(std::vector<double>{x}, std::vector<double>{y});
  }
  // Normal-equation oracle.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;

  for (Optimizer opt : {Optimizer::rprop, Optimizer::adam}) {
    MlpNet net({1, 1}, {Activation::linear});
    TrainConfig cfg;
    cfg.optimizer = opt;
    cfg.epochs = 200;
    cfg.learning_rate = 0.05;
    auto r = train(net, d, cfg);
    CHECK(r.loss_trace.size() == 200);
    CHECK(std::abs(net.weights(0)[0] - slope) < 1e-3);
    CHECK(std::abs(net.biases(0)[0] - intercept) < 1e-3);
  }
}

TEST_CASE("train: RPROP strictly decreases a convex quadratic for the first epochs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d(2, 1);
  for (int i = 0; i < 400; ++i) {
    const double a = u(rng), b = u(rng);
    d.add(std::vector<double>{a, b}, std::vector<double>{4.0 * a - 5.0 * b + 3.5});
  }
  MlpNet net({2, 1}, {Activation::linear});
  TrainConfig cfg;
  cfg.optimizer = Optimizer::rprop;
  cfg.epochs = 10;
  auto r = train(net, d, cfg);
  for (std::size_t e = 1; e < r.loss_trace.size(); ++e)
    CHECK(r.loss_trace[e] < r.loss_trace[e - 1]);
}

TEST_CASE("train: identical seeds and data give identical weights") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d(2, 3);
  for (int i = 0; i < 64; ++i) {
    const double a = u(rng), b = u(rng);
    d.add(std::vector<double>{a, b}, std::vector<double>{0.5 + 0.2 * a, 0.4 * b * b, 0.3});
  }
  auto make = [] {
    MlpNet net({2, 10, 10, 3}, {Activation::logistic, Activation::tanh, Activation::logistic});
    net.init_he(42);
    return net;
  };
  TrainConfig cfg;
  cfg.optimizer = Optimizer::adam;
  cfg.learning_rate = 0.03;
  cfg.epochs = 30;
  cfg.iterations = 3;
  auto n1 = make(), n2 = make();
  auto r1 = train(n1, d, cfg);
  auto r2 = train(n2, d, cfg);
  CHECK(n1 == n2);
  CHECK(r1.loss_trace == r2.loss_trace);
  CHECK(r1.loss_trace.size() == 90);
  CHECK(r1.loss_trace.back() < r1.loss_trace.front());

  // Mini-batch mode is deterministic too.
  cfg.batch_size = 16;
  cfg.shuffle_seed = 9;
  auto n3 = make(), n4 = make();
  train(n3, d, cfg);
  train(n4, d, cfg);
  CHECK(n3 == n4);
}

TEST_CASE("train: iterations carry optimizer state (equivalent to one long run)") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d(2, 1);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng), b = u(rng);
    d.add(std::vector<double>{a, b}, std::vector<double>{0.5 * std::sin(a + b)});
  }
  MlpNet a({2, 5, 1}, {Activation::tanh, Activation::linear});
  a.init_he(3);
  MlpNet b = a;
  TrainConfig split;
  split.optimizer = Optimizer::adam;
  split.learning_rate = 0.01;
  split.epochs = 20;
  split.iterations = 5;
  TrainConfig single = split;
  single.epochs = 100;
  single.iterations = 1;
  train(a, d, split);
  train(b, d, single);
  CHECK(a == b);
}

TEST_CASE("train: NaN targets abort with a numeric error") {
  Dataset d(1, 1);
  d.add(std::vector<double>{0.5}, std::vector<double>{std::nan("")});
  MlpNet net({1, 1}, {Activation::linear});
  TrainConfig cfg;
  CHECK_THROWS_AS(train(net, d, cfg), cann::NumericError);
}

TEST_CASE("train: dimension mismatch and empty data are config errors") {
  MlpNet net({2, 1}, {Activation::linear});
  TrainConfig cfg;
  Dataset empty(2, 1);
  CHECK_THROWS_AS(train(net, empty, cfg), cann::ConfigError);
  Dataset wrong(3, 1);
  wrong.add(std::vector<double>{1, 2, 3}, std::vector<double>{1});
  CHECK_THROWS_AS(train(net, wrong, cfg), cann::ConfigError);
}

TEST_CASE("serialization round-trips bit-exactly") {
  auto net = random_net({2, 25, 25, 3}, {Activation::logistic, Activation::tanh, Activation::logistic}, 17);
  net.params()[0] = 1.0 / 3.0;
  net.params()[1] = -1e-300;
  std::stringstream ss;
  write(ss, net);
  auto back = read(ss);
  CHECK(back == net);

  std::stringstream bad("cann-mlp 99\n");
  CHECK_THROWS_AS(read(bad), cann::ConfigError);
}

TEST_CASE("training is equivalent under scalar and SIMD kernels") {
  if (cann::simd::avx2_kernels() == nullptr)
    return;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d(2, 3);
  for (int i = 0; i < 101; ++i) {
    const double a = u(rng), b = u(rng);
    d.add(std::vector<double>{a, b}, std::vector<double>{0.5 + 0.3 * a * b, 0.2 + 0.1 * a, 0.7});
  }
  MlpNet n1({2, 25, 25, 3}, {Activation::logistic, Activation::tanh, Activation::logistic});
  n1.init_he(1);
  MlpNet n2 = n1;
  TrainConfig cfg;
  cfg.optimizer = Optimizer::adam;
  cfg.learning_rate = 0.03;
  cfg.epochs = 20;
  cann::simd::select(cann::simd::Isa::scalar);
  auto r1 = train(n1, d, cfg);
  cann::simd::select(cann::simd::Isa::avx2);
  auto r2 = train(n2, d, cfg);
  for (std::size_t i = 0; i < n1.n_params(); ++i)
    CHECK(std::abs(n1.params()[i] - n2.params()[i]) < 1e-9);
  CHECK(r1.loss_trace.back() == doctest::Approx(r2.loss_trace.back()).epsilon(1e-9));
}
