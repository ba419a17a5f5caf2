#pragma once

#include "cann/mlp.hpp"
#include "cann/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cann::mpn {

// Strain -> stress network for the reference material. Inputs are strains
// divided by a per-location scale S; outputs are stresses in internal units
// (stress_unit_pa Pa each) divided by stress_scale.
struct MaterialPropertyNet {
  mlp::MlpNet net;
  double stress_scale = 1.0;
  double stress_unit_pa = 1e4;

  static mlp::MlpNet make_core();

  // Pa.
  StressVector predict_stress(const StrainVector& strain, const Vec3& scale) const;
  // Raw network output with every scaled input except component k zeroed (k in 0..2).
  Vec3 masked_predict(const StrainVector& strain, const Vec3& scale, int k) const;
  // d(stress in Pa)/d(strain).
  Mat3 tangent_stiffness(const StrainVector& strain, const Vec3& scale) const;

  // Raw network output and its Jacobian at an already scaled input.
  Vec3 core(const Vec3& scaled) const;
  Mat3 core_jacobian(const Vec3& scaled) const;
};

void check_scale(const Vec3& scale);

struct PretrainConfig {
  double e_ref_pa = 10e3;
  double poisson = 0.5;
  std::size_t n_samples = 5000;
  double strain_range = 0.2;
  double stress_unit_pa = 1e4;
  double stress_scale = 1.0;
  // Raise stress_scale to 1.25 max|target| when scaled targets would exceed 0.8.
  bool auto_stress_scale = true;
  double init_range = 0.2;
  double shear_sign = 1.0;
  std::uint64_t seed = 1;
  mlp::TrainConfig train = default_train();

  static mlp::TrainConfig default_train();
  void validate() const;
};

struct PretrainResult {
  MaterialPropertyNet mpn;
  std::vector<double> loss_trace;
  std::size_t n_pairs = 0;
  bool stress_scale_raised = false;
};

PretrainResult pretrain(const PretrainConfig& cfg);

// Aggregate relative error sqrt(sum |s_nn - C e|^2 / sum |C e|^2) over n strains
// uniform in +-range per component.
double fidelity_error(const MaterialPropertyNet& mpn, double e_ref_pa, double poisson, std::size_t n,
                      double range, std::uint64_t seed);

void write(std::ostream& out, const MaterialPropertyNet& m);
void write(const std::filesystem::path& path, const MaterialPropertyNet& m);
// expected_unit_pa > 0 rejects files written for another stress unit.
MaterialPropertyNet read(std::istream& in, double expected_unit_pa = 0.0);
MaterialPropertyNet read(const std::filesystem::path& path, double expected_unit_pa = 0.0);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit engine draw.
double unit_uniform(std::uint64_t bits);

} // namespace cann::mpn
