#include <doctest.h>

#include "cann/error.hpp"
#include "cann/recon.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace cann;
using namespace cann::recon;

namespace {

mpn::MaterialPropertyNet linear_mpn(double e_pa) {
  mpn::MaterialPropertyNet m;
  m.net = mlp::MlpNet({3, 3}, {mlp::Activation::linear});
  const Mat3 c = plane_stress_matrix(e_pa, 0.5);
  auto w = m.net.weights(0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      w[3 * i + j] = c[i][j] / m.stress_unit_pa;
  return m;
}

sn::SpatialNet constant_sn(const Vec3& s) {
  auto mesh = femesh::make_rectilinear(50, 50, 3);
  scaling::ScalingField f;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    f.coords.push_back(mesh.centroid(e));
    f.scales.push_back(s);
  }
  sn::SnTrainSpec spec;
  spec.iterations = 1;
  spec.epochs = 1;
  return sn::fit(f, mesh, spec).sn;
}

ModulusImage uniform_image(double e, std::size_t n = 101) {
  ModulusImage img;
  img.grid = Grid(n, n, e);
  img.extent = {{0, 0}, {50, 50}};
  img.probe_strain = default_probe_strain();
  return img;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("plane-stress inversion is exact") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(1e3, 100e3);
  const auto probe = default_probe_strain();
  for (int i = 0; i < 100; ++i) {
    const double e = u(rng);
    const Vec3 s = matvec(plane_stress_matrix(e, 0.5), probe.c);
    CHECK(std::abs(invert_plane_stress(StressVector{s}, probe) - e) <= 1e-12 * e);
  }
  // 0.75 / 0.0065 with the default probe
  CHECK(invert_plane_stress(StressVector{{0, 65, 0}}, probe) == doctest::Approx(7500.0).epsilon(1e-14));
}

TEST_CASE("probe strain checks") {
  CHECK_THROWS_AS(check_probe_strain(StrainVector{{0.01, -0.005, 0}}), ConfigError);
  CHECK_THROWS_AS(check_probe_strain(StrainVector{{0.3, 0.005, 0}}), ConfigError);
  CHECK_NOTHROW(check_probe_strain(default_probe_strain()));
}

TEST_CASE("reference network with unit scale gives the reference modulus") {
  Cann c{linear_mpn(10e3), constant_sn({1, 1, 1}), 1e4};
  auto img = reconstruct(c, 101, 101);
  CHECK(img.nonpositive == 0);
  for (double e : img.grid.values)
    CHECK(std::abs(e - 10e3) < 0.03 * 10e3);
  CHECK(img.point(0, 0) == Point2{0, 50});
  CHECK(img.point(100, 100) == Point2{50, 0});

  // S = 10/12 everywhere encodes a 12 kPa material
  Cann d{linear_mpn(10e3), constant_sn({10.0 / 12, 10.0 / 12, 10.0 / 12}), 1e4};
  auto target = phantom::make_gaussian_inclusion(50, 50, 12e3, 12e3, {25, 25}, 5);
  auto s = score(reconstruct(d, 101, 101), target);
  CHECK(s.mean < 1e-3);

  Cann bad = c;
  bad.stress_unit_pa = 1e3;
  CHECK_THROWS_AS(reconstruct(bad, 11, 11), ConfigError);
}

TEST_CASE("halving the probe strain barely changes a trained reconstruction") {
  mpn::PretrainConfig pc;
  pc.train.epochs = 500;
  auto m = mpn::pretrain(pc).mpn;
  auto mesh = femesh::make_rectilinear(50, 50, 8);
  scaling::ScalingField f;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Point2 p = mesh.centroid(e);
    f.coords.push_back(p);
    const double bump = std::exp(-((p.x - 25) * (p.x - 25) + (p.y - 25) * (p.y - 25)) / 72.0);
    f.scales.push_back({1 - 0.6 * bump, 1 - 0.6 * bump, 1});
  }
  sn::SnTrainSpec spec;
  spec.iterations = 2;
  spec.epochs = 300;
  Cann c{m, sn::fit(f, mesh, spec).sn, 1e4};
  const auto probe = default_probe_strain();
  const StrainVector half{{probe[0] / 2, probe[1] / 2, probe[2] / 2}};
  auto a = reconstruct(c, 41, 41, probe), b = reconstruct(c, 41, 41, half);
  for (std::size_t i = 0; i < a.grid.values.size(); ++i)
    CHECK(std::abs(a.grid.values[i] - b.grid.values[i]) < 0.05 * a.grid.values[i]);
}

TEST_CASE("scoring") {
  auto ten = phantom::make_gaussian_inclusion(50, 50, 10e3, 10e3, {25, 25}, 5);
  auto s = score(uniform_image(10e3), ten);
  CHECK(s.mean == 0.0);
  CHECK(s.std == 0.0);
  CHECK(s.error_map.rows == 101);
  s = score(uniform_image(9e3), ten);
  CHECK(s.mean == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.std < 1e-12);

  // label rasters are scored at their pixel centres
  Grid labels(4, 5, 0.0);
  labels.at(1, 1) = 1;
  auto region = phantom::make_region_labeled(50, 50, labels, {{0, 10e3}, {1, 20e3}});
  s = score(uniform_image(10e3, 11), region);
  CHECK(s.error_map.rows == 4);
  CHECK(s.error_map.cols == 5);
  CHECK(s.mean == doctest::Approx(0.5 / 20).epsilon(1e-12));

  auto small = uniform_image(10e3);
  small.extent = {{0, 0}, {40, 50}};
  CHECK_THROWS_AS(score(small, ten), ConfigError);
}

TEST_CASE("bilinear sampling") {
  ModulusImage img = uniform_image(0, 2);
  img.grid.at(0, 0) = 1; // top left
  img.grid.at(0, 1) = 2;
  img.grid.at(1, 0) = 3;
  img.grid.at(1, 1) = 4;
  CHECK(img.sample({0, 50}) == 1);
  CHECK(img.sample({50, 0}) == 4);
  CHECK(img.sample({25, 25}) == doctest::Approx(2.5));
  CHECK(img.sample({60, 25}) == doctest::Approx(3.0));
}

TEST_CASE("rendering and image files") {
  const auto dir = std::filesystem::temp_directory_path() / "cann_test_recon";
  std::filesystem::create_directories(dir);

  auto flat = uniform_image(12e3, 3);
  render(flat, dir / "flat");
  const std::string pgm = slurp(dir / "flat.pgm");
  const std::string pixels = pgm.substr(pgm.size() - 9);
  CHECK(pixels == std::string(9, pixels[0]));

  auto ramp = uniform_image(0, 2);
  ramp.grid.values = {1e3, 2e3, 3e3, 4e3};
  auto w = render(ramp, dir / "ramp");
  CHECK(w.lo == 1e3);
  CHECK(w.hi == 4e3);
  const std::string rp = slurp(dir / "ramp.pgm");
  const auto* px = reinterpret_cast<const unsigned char*>(rp.data() + rp.size() - 4);
  CHECK(px[0] < px[1]);
  CHECK(px[1] < px[2]);
  CHECK(px[2] < px[3]);
  CHECK(std::filesystem::exists(dir / "ramp.window.json"));

  auto back = read_image_csv(dir / "ramp.csv");
  CHECK(back.grid.values == ramp.grid.values);
  CHECK(back.extent.hi.x == 50);
  CHECK(back.probe_strain == ramp.probe_strain);

  std::stringstream bad("# cann-image 1\n# extent_mm: 0 0 50 50\n# rows_cols: 2 2\n1,2\n3\n");
  CHECK_THROWS_AS(read_image_csv(bad), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cann_test_model";
  Cann c{linear_mpn(10e3), constant_sn({1, 0.5, 1}), 1e4};
  save(dir, c);
  auto d = load(dir);
  CHECK(reconstruct(d, 5, 5).grid.values == reconstruct(c, 5, 5).grid.values);
  std::filesystem::remove_all(dir);
}
