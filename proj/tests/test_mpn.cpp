#include <doctest.h>

#include "cann/error.hpp"
#include "cann/mpn.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace cann;
using namespace cann::mpn;

namespace {

const PretrainResult& trained() {
  static const PretrainResult r = pretrain(PretrainConfig{});
  return r;
}

const Mat3 kC = plane_stress_matrix(10e3, 0.5);

} // namespace

TEST_CASE("pretraining data and stress scale") {
  const auto& r = trained();
  CHECK(r.n_pairs == 10000);
  CHECK_FALSE(r.stress_scale_raised);
  CHECK(r.mpn.stress_scale == 1.0);
  CHECK(r.loss_trace.back() < r.loss_trace.front());

  PretrainConfig small;
  small.stress_unit_pa = 1e3;
  small.train.epochs = 1;
  auto raised = pretrain(small);
  CHECK(raised.stress_scale_raised);
  CHECK(raised.mpn.stress_scale == doctest::Approx(1.25 * 4.0).epsilon(0.02));

  small.auto_stress_scale = false;
  CHECK_THROWS_AS(pretrain(small), ConfigError);
}

TEST_CASE("reference response matches the elasticity matrix") {
  const auto& m = trained().mpn;
  auto s = m.predict_stress({{0.01, 0, 0}}, {1, 1, 1});
  CHECK(s[0] == doctest::Approx(133.333).epsilon(0.03));
  CHECK(s[1] == doctest::Approx(66.667).epsilon(0.03));
  CHECK(std::abs(s[2]) < 0.03 * 133.333);
  auto z = m.predict_stress({}, {1, 2, 3});
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  CHECK(z[2] == 0.0);
  CHECK(fidelity_error(m, 10e3, 0.5, 1000, 0.1, 99) < 0.03);
}

TEST_CASE("strain scale divides the response") {
  const auto& m = trained().mpn;
  StrainVector e{{0.01, -0.006, 0.002}};
  auto one = m.predict_stress(e, {1, 1, 1});
  auto two = m.predict_stress(e, {2, 2, 2});
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(two[k] - one[k] / 2) <= 0.02 * norm(one.c) / 2);
  CHECK_THROWS_AS(m.predict_stress(e, {1, 0, 1}), ConfigError);
  CHECK_THROWS_AS(m.predict_stress(e, {1, 1, -2}), ConfigError);
}

TEST_CASE("masked prediction") {
  const auto& m = trained().mpn;
  StrainVector e{{0.0, -0.02, 0.004}};
  auto none = m.masked_predict(e, {1, 1, 1}, 0);
  CHECK(none == Vec3{0, 0, 0});
  StrainVector f{{0.012, -0.02, 0.004}};
  Vec3 sum{};
  for (int k = 0; k < 3; ++k) {
    auto part = m.masked_predict(f, {1, 1, 1}, k);
    for (int i = 0; i < 3; ++i)
      sum[i] += part[i];
  }
  auto full = m.core({f[0], f[1], f[2]});
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(sum[i] - full[i]) < 1e-3);
  StrainVector shear{{0, 0, 0.01}};
  CHECK(m.masked_predict(shear, {1, 1, 1}, 2) == m.core({0, 0, 0.01}));
  CHECK_THROWS_AS(m.masked_predict(f, {1, 1, 1}, 3), ConfigError);
}

TEST_CASE("tangent stiffness") {
  const auto& m = trained().mpn;
  auto d = m.tangent_stiffness({}, {1, 1, 1});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double ref = kC[i][j] != 0 ? std::abs(kC[i][j]) : kC[0][0];
      CHECK(std::abs(d[i][j] - kC[i][j]) <= 0.05 * ref);
    }
  // finite differences of predict_stress
  StrainVector e{{0.02, -0.03, 0.01}};
  Vec3 s{1.3, 0.8, 1.1};
  auto dt = m.tangent_stiffness(e, s);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    StrainVector p = e, q = e;
    p[j] += h;
    q[j] -= h;
    auto sp = m.predict_stress(p, s), sq = m.predict_stress(q, s);
    for (int i = 0; i < 3; ++i) {
      const double fd = (sp[i] - sq[i]) / (2 * h);
      CHECK(std::abs(fd - dt[i][j]) <= 1e-5 * std::max(std::abs(dt[i][j]), 1.0));
    }
  }
  auto half = m.tangent_stiffness({}, {2, 1, 1});
  for (int i = 0; i < 3; ++i) {
    CHECK(half[i][0] == doctest::Approx(d[i][0] / 2).epsilon(1e-14));
    CHECK(half[i][1] == d[i][1]);
  }
}

TEST_CASE("learned frame invariance") {
  const auto& m = trained().mpn;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int n = 0; n < 200; ++n) {
    StrainVector e{{u(rng), u(rng), u(rng)}};
    StrainVector sw{{e[1], e[0], e[2]}};
    auto a = m.predict_stress(e, {1, 1, 1});
    auto b = m.predict_stress(sw, {1, 1, 1});
    const double scale = norm(a.c);
    CHECK(std::abs(a[0] - b[1]) <= 0.02 * scale);
    CHECK(std::abs(a[1] - b[0]) <= 0.02 * scale);
  }
}

TEST_CASE("file round trip, unit check, determinism") {
  const auto& m = trained().mpn;
  std::stringstream ss;
  write(ss, m);
  std::stringstream copy(ss.str());
  auto back = read(ss, 1e4);
  CHECK(back.net == m.net);
  CHECK(back.stress_scale == m.stress_scale);
  CHECK_THROWS_AS(read(copy, 1e3), ConfigError);

  PretrainConfig c;
  c.train.epochs = 20;
  auto a = pretrain(c), b = pretrain(c);
  CHECK(a.mpn.net == b.mpn.net);
  c.seed = 2;
  CHECK_FALSE(pretrain(c).mpn.net == a.mpn.net);
}
