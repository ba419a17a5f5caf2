#include <doctest.h>

#include "cann/error.hpp"
#include "cann/femesh.hpp"
#include "cann/phantom.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

using namespace cann;
using namespace cann::phantom;

TEST_CASE("gaussian inclusion") {
  auto f = make_gaussian_inclusion(50, 50, 30e3, 10e3, {25, 25}, 6);
  CHECK(f.eval(25, 25) == 30e3);
  CHECK(f.eval(0, 0) == doctest::Approx(10e3).epsilon(0.01));
  // max over a fine grid is at the centre
  double mx = 0;
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j)
      mx = std::max(mx, f.eval(i * 0.5, j * 0.5));
  CHECK(mx == 30e3);
  auto flat = make_gaussian_inclusion(50, 50, 10e3, 10e3, {25, 25}, 6);
  CHECK(flat.eval(25, 25) == 10e3);
  CHECK(flat.eval(3, 40) == 10e3);
  CHECK_THROWS_AS(make_gaussian_inclusion(50, 50, 5e3, 10e3, {25, 25}, 6), ConfigError);
  CHECK_THROWS_AS(make_gaussian_inclusion(50, 50, 30e3, 10e3, {25, 25}, 0), ConfigError);
}

TEST_CASE("three inclusion") {
  std::vector<Disc> discs{{{10, 25}, 4, 15e3}, {{25, 25}, 6, 15e3}, {{25, 25}, 2.5, 30e3}, {{40, 25}, 4, 30e3}};
  auto f = make_three_inclusion(50, 50, 8e3, discs);
  CHECK(f.eval(2, 2) == 8e3);
  CHECK(f.eval(25, 25) == 30e3);
  CHECK(f.eval(29, 25) == 15e3);
  CHECK(f.eval(10, 25) == 15e3);
  CHECK(f.eval(40, 27) == 30e3);
  auto empty = make_three_inclusion(50, 50, 8e3, {});
  CHECK(empty.eval(25, 25) == 8e3);
  CHECK_THROWS_AS(make_three_inclusion(50, 50, 8e3, {{{2, 25}, 4, 15e3}}), ConfigError);
}

TEST_CASE("image derived") {
  Grid g(2, 2);
  g.values = {0, 10, 20, 30};
  auto f = make_image_derived(50, 50, g, 8e3, 30e3);
  // pixel centres: (12.5, 37.5) top-left .. (37.5, 12.5) bottom-right
  CHECK(f.eval(12.5, 37.5) == 8e3);
  CHECK(f.eval(37.5, 12.5) == 30e3);
  const double mean = (8e3 + 30e3 + 8e3 + 22e3 / 3 + 8e3 + 44e3 / 3) / 4;
  CHECK(f.eval(25, 25) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(f.eval(0, 50) == 8e3);
  Grid c(3, 3, 7.0);
  CHECK(make_image_derived(50, 50, c, 8e3, 30e3).eval(10, 10) == 19e3);
  CHECK(f.native_grid()->first == 2);
}

TEST_CASE("region labeled") {
  Grid one(4, 4, 3.0);
  CHECK(make_region_labeled(50, 50, one, {{3, 10e3}}).eval(17, 33) == 10e3);
  Grid two(1, 2);
  two.values = {0, 1};
  auto f = make_region_labeled(50, 50, two, {{0, 5e3}, {1, 9e3}});
  CHECK(f.eval(24.999, 10) == 5e3);
  CHECK(f.eval(25.001, 10) == 9e3);
  CHECK_THROWS_AS(make_region_labeled(50, 50, two, {{0, 5e3}}), ConfigError);
}

TEST_CASE("shipped kidney phantom matches its label map") {
  auto labels = read_raster(std::filesystem::path(CANN_DATA_DIR) / "phantoms" / "kidney_labels.txt");
  auto f = load_config(std::filesystem::path(CANN_DATA_DIR) / "phantoms" / "model3.json");
  const std::map<int, double> e{{0, 8000}, {1, 10100}, {2, 9300}, {3, 8800}, {4, 6900}, {5, 10700}, {6, 6100}};
  for (std::size_t r = 0; r < labels.rows; ++r)
    for (std::size_t c = 0; c < labels.cols; ++c) {
      const double x = (c + 0.5) * 0.5, y = 50 - (r + 0.5) * 0.5;
      REQUIRE(f.eval(x, y) == e.at(static_cast<int>(labels.at(r, c))));
    }
}

TEST_CASE("noise bounds, identity, determinism, independence") {
  auto mesh = femesh::make_rectilinear(50, 50, 35);
  std::vector<Point2> sites;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e)
    sites.push_back(mesh.centroid(e));
  auto base = make_three_inclusion(50, 50, 10e3, {});
  auto n1 = apply_noise(base, {0.10, 7, 1}, sites);
  auto v1 = sample(n1, sites);
  for (double v : v1) {
    CHECK(v >= 9e3);
    CHECK(v <= 11e3);
  }
  auto again = sample(apply_noise(base, {0.10, 7, 1}, sites), sites);
  CHECK(again == v1);
  auto id = sample(apply_noise(base, {0.0, 7, 1}, sites), sites);
  for (double v : id)
    CHECK(v == 10e3);

  auto a = noise_multipliers({0.3, 7, 1}, 5000);
  auto b = noise_multipliers({0.3, 7, 2}, 5000);
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 0.1);
  CHECK_THROWS_AS(apply_noise(base, {1.0, 7, 1}, sites), ConfigError);
}

TEST_CASE("psnr of the kidney phantom") {
  auto mesh = femesh::make_rectilinear(50, 50, 35);
  std::vector<Point2> sites;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e)
    sites.push_back(mesh.centroid(e));
  auto f = load_config(std::filesystem::path(CANN_DATA_DIR) / "phantoms" / "model3.json");
  auto clean = sample(f, sites);
  const double p30 = psnr_db(clean, sample(apply_noise(f, {0.30, 11, 1}, sites), sites));
  const double p10 = psnr_db(clean, sample(apply_noise(f, {0.10, 11, 1}, sites), sites));
  MESSAGE("psnr 10% ", p10, " 30% ", p30);
  CHECK(std::abs(p30 - 17.6) < 1.0);
  CHECK(std::abs(p10 - 27.2) < 1.0);
}

TEST_CASE("config parsing") {
  auto j = nlohmann::json::parse(R"({"model": "gaussian_inclusion", "peak_pa": 20000})");
  auto f = from_json(j);
  CHECK(f.eval(25, 25) == 20e3);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"model": "blob"})")), ConfigError);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"peak_pa": 1})")), ConfigError);
  for (const char* name : {"model1.json", "model2.json", "model3.json", "model4.json"}) {
    auto m = load_config(std::filesystem::path(CANN_DATA_DIR) / "phantoms" / name);
    CHECK(m.eval(25, 25) > 0);
  }
  auto m4 = load_config(std::filesystem::path(CANN_DATA_DIR) / "phantoms" / "model4.json");
  double lo = 1e9, hi = 0;
  for (int i = 0; i < 128; ++i)
    for (int k = 0; k < 128; ++k) {
      const double v = m4.eval((k + 0.5) * 50 / 128, 50 - (i + 0.5) * 50 / 128);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(lo == doctest::Approx(8e3));
  CHECK(hi == doctest::Approx(30e3));
}

TEST_CASE("grid and pgm io") {
  Grid g(2, 3);
  g.values = {1, 2, 3, 4, 5, 6.5};
  std::stringstream ss;
  write_grid_text(ss, g);
  auto back = read_grid_text(ss);
  CHECK(back.values == g.values);
  std::stringstream ps;
  write_pgm(ps, g, 1, 6.5);
  auto pg = read_pgm(ps);
  CHECK(pg.rows == 2);
  CHECK(pg.cols == 3);
  CHECK(pg.values.front() == 0);
  CHECK(pg.values.back() == 255);
  for (std::size_t i = 1; i < pg.values.size(); ++i)
    CHECK(pg.values[i] > pg.values[i - 1]);
  std::istringstream p2("P2\n# c\n2 1\n9\n0 9\n");
  auto a = read_pgm(p2);
  CHECK(a.values == std::vector<double>{0, 9});
  std::istringstream bad("2 2\n1 2 3\n");
  CHECK_THROWS_AS(read_grid_text(bad), ConfigError);
}
