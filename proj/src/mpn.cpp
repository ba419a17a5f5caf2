#include "cann/mpn.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cann::mpn {

using mlp::Activation;

double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

mlp::MlpNet MaterialPropertyNet::make_core() {
  return mlp::MlpNet({3, 6, 6, 3}, {Activation::tanh, Activation::tanh, Activation::tanh});
}

void check_scale(const Vec3& scale) {
  for (double s : scale)
    if (!(s > 0.0) || !std::isfinite(s))
      throw ConfigError("strain scale components must be positive");
}

Vec3 MaterialPropertyNet::core(const Vec3& scaled) const {
  Vec3 out{};
  net.forward(scaled, out);
  return out;
}

Mat3 MaterialPropertyNet::core_jacobian(const Vec3& scaled) const {
  const auto j = net.jacobian(scaled);
  Mat3 m{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      m[i][k] = j[i * 3 + k];
  return m;
}

StressVector MaterialPropertyNet::predict_stress(const StrainVector& strain, const Vec3& scale) const {
  check_scale(scale);
  const Vec3 y = core({strain[0] / scale[0], strain[1] / scale[1], strain[2] / scale[2]});
  const double f = stress_scale * stress_unit_pa;
  return StressVector{{f * y[0], f * y[1], f * y[2]}};
}

Vec3 MaterialPropertyNet::masked_predict(const StrainVector& strain, const Vec3& scale, int k) const {
  if (k < 0 || k > 2)
    throw ConfigError("masked_predict: component index must be 0, 1 or 2");
  check_scale(scale);
  Vec3 in{};
  in[k] = strain[k] / scale[k];
  return core(in);
}

Mat3 MaterialPropertyNet::tangent_stiffness(const StrainVector& strain, const Vec3& scale) const {
  check_scale(scale);
  const Mat3 j = core_jacobian({strain[0] / scale[0], strain[1] / scale[1], strain[2] / scale[2]});
  const double f = stress_scale * stress_unit_pa;
  Mat3 d{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      d[i][k] = f * j[i][k] / scale[k];
  return d;
}

mlp::TrainConfig PretrainConfig::default_train() {
  mlp::TrainConfig t;
  t.optimizer = mlp::Optimizer::rprop;
  t.epochs = 5000;
  t.iterations = 1;
  t.train_biases = false;
  return t;
}

void PretrainConfig::validate() const {
  if (!(e_ref_pa > 0.0))
    throw ConfigError("reference modulus must be positive");
  if (!(poisson >= 0.0 && poisson <= 0.5))
    throw ConfigError("Poisson's ratio must lie in [0, 0.5]");
  if (n_samples == 0)
    throw ConfigError("pretraining needs at least one sample");
  if (!(strain_range > 0.0))
    throw ConfigError("strain range must be positive");
  if (!(stress_unit_pa > 0.0) || !(stress_scale > 0.0))
    throw ConfigError("stress unit and stress scale must be positive");
  train.validate();
}

PretrainResult pretrain(const PretrainConfig& cfg) {
  cfg.validate();
  const Mat3 c = plane_stress_matrix(cfg.e_ref_pa, cfg.poisson);
  std::mt19937_64 rng(cfg.seed);
  std::vector<Vec3> strains(cfg.n_samples), stresses(cfg.n_samples);
  double peak = 0.0;
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    for (double& e : strains[i])
      e = cfg.strain_range * (2.0 * unit_uniform(rng()) - 1.0);
    stresses[i] = matvec(c, strains[i]);
    for (double& s : stresses[i]) {
      s /= cfg.stress_unit_pa;
      peak = std::max(peak, std::abs(s));
    }
  }

  PretrainResult res;
  res.mpn.stress_unit_pa = cfg.stress_unit_pa;
  res.mpn.stress_scale = cfg.stress_scale;
  if (peak / cfg.stress_scale >= 0.8) {
    if (cfg.auto_stress_scale) {
      res.mpn.stress_scale = 1.25 * peak;
      res.stress_scale_raised = true;
    } else if (peak / cfg.stress_scale >= 1.0) {
      throw ConfigError("pretraining targets reach " + fmt_double(peak / cfg.stress_scale) +
                        " after stress scaling; the output layer saturates at 1");
    }
  }

  mlp::Dataset data(3, 3);
  auto add = [&](const Vec3& e, const Vec3& s) {
    const Vec3 t{s[0] / res.mpn.stress_scale, s[1] / res.mpn.stress_scale, s[2] / res.mpn.stress_scale};
    data.add(e, t);
  };
  for (std::size_t i = 0; i < cfg.n_samples; ++i)
    add(strains[i], stresses[i]);
  for (std::size_t i = 0; i < cfg.n_samples; ++i)
    add({strains[i][1], strains[i][0], cfg.shear_sign * strains[i][2]},
        {stresses[i][1], stresses[i][0], cfg.shear_sign * stresses[i][2]});
  res.n_pairs = data.size();

  res.mpn.net = MaterialPropertyNet::make_core();
  res.mpn.net.init_uniform(cfg.init_range, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  res.loss_trace = mlp::train(res.mpn.net, data, cfg.train).loss_trace;
  return res;
}

double fidelity_error(const MaterialPropertyNet& mpn, double e_ref_pa, double poisson, std::size_t n,
                      double range, std::uint64_t seed) {
  const Mat3 c = plane_stress_matrix(e_ref_pa, poisson);
  std::mt19937_64 rng(seed);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    StrainVector e;
    for (double& v : e.c)
      v = range * (2.0 * unit_uniform(rng()) - 1.0);
    const Vec3 ref = matvec(c, e.c);
    const StressVector got = mpn.predict_stress(e, {1.0, 1.0, 1.0});
    for (int k = 0; k < 3; ++k) {
      num += (got[k] - ref[k]) * (got[k] - ref[k]);
      den += ref[k] * ref[k];
    }
  }
  return std::sqrt(num / den);
}

void write(std::ostream& out, const MaterialPropertyNet& m) {
  out << "cann-mpn 1\n";
  out << "stress_unit_pa " << fmt_double(m.stress_unit_pa) << '\n';
  out << "stress_scale " << fmt_double(m.stress_scale) << '\n';
  mlp::write(out, m.net);
}

void write(const std::filesystem::path& path, const MaterialPropertyNet& m) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write network file " + path.string());
  write(out, m);
}

MaterialPropertyNet read(std::istream& in, double expected_unit_pa) {
  std::string tok;
  int version = 0;
  if (!(in >> tok) || tok != "cann-mpn" || !(in >> version) || version != 1)
    throw ConfigError("not a material network file (expected 'cann-mpn 1')");
  MaterialPropertyNet m;
  auto field = [&](const char* key, double& v) {
    std::string val;
    if (!(in >> tok) || tok != key || !(in >> val) || !parse_double(val, v))
      throw ConfigError(std::string("material network file: bad '") + key + "' line");
  };
  field("stress_unit_pa", m.stress_unit_pa);
  field("stress_scale", m.stress_scale);
  if (expected_unit_pa > 0.0 && m.stress_unit_pa != expected_unit_pa)
    throw ConfigError("material network stress unit " + fmt_double(m.stress_unit_pa) +
                      " Pa does not match the expected " + fmt_double(expected_unit_pa) + " Pa");
  m.net = mlp::read(in);
  if (m.net.layer_sizes().front() != 3 || m.net.layer_sizes().back() != 3)
    throw ConfigError("material network must map 3 strains to 3 stresses");
  return m;
}

MaterialPropertyNet read(const std::filesystem::path& path, double expected_unit_pa) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open network file " + path.string());
  return read(in, expected_unit_pa);
}

} // namespace cann::mpn
