#pragma once

#include "cann/mpn.hpp"
#include "cann/samples.hpp"
#include "cann/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace cann::scaling {

enum class UpdateUnit {
  // eta_stress_unit_pa everywhere
  fixed,
  // RMS magnitude of the target stresses at the point being updated
  point_rms,
};

struct GdConfig {
  int iterations = 150;
  double eta = 2.5;
  double s_floor = 1e-3;
  bool use_exact_gradient = false;
  // Stresses enter the update measured in this unit, so eta keeps its meaning
  // whatever unit the network itself was trained in.
  double eta_stress_unit_pa = 1e3;
  UpdateUnit stress_unit = UpdateUnit::fixed;

  void validate() const;
};

struct PointSample {
  StressVector target; // Pa
  StrainVector strain;
};

struct PointResult {
  Vec3 scale{};
  // RMS of |target - predicted| in Pa after 0, 1, ..., iterations sweeps.
  std::vector<double> rms;
};

// One call runs cfg.iterations sweeps of the descent update, component by
// component, with the masked-output approximation of the inner sum.
PointResult update_point(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples,
                         const Vec3& start, const GdConfig& cfg);
// Same iteration with the inner sum taken from the network Jacobian.
PointResult update_point_exact(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples,
                               const Vec3& start, const GdConfig& cfg);

// Increments of all three components at a frozen scale (no clamping), for
// comparing the two inner sums.
Vec3 update_direction(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples,
                      const Vec3& scale, const GdConfig& cfg, bool exact);

double rms_error(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples, const Vec3& scale);

struct IterationError {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct ScalingField {
  std::vector<Point2> coords;
  std::vector<Vec3> scales;
  std::vector<IterationError> curve; // index = iteration, 0 = initial
  GdConfig config;

  std::size_t size() const { return coords.size(); }
};

std::vector<std::vector<PointSample>> group_samples(const SampleSet& s, std::vector<Point2>* coords = nullptr);

ScalingField compute_field(const mpn::MaterialPropertyNet& m, const SampleSet& samples, const GdConfig& cfg);

void write_field_csv(std::ostream& out, const ScalingField& f);
void write_field_csv(const std::filesystem::path& path, const ScalingField& f);
void write_curve_csv(std::ostream& out, const ScalingField& f);
void write_curve_csv(const std::filesystem::path& path, const ScalingField& f);
// Fills coords and scales only.
ScalingField read_field_csv(std::istream& in);
ScalingField read_field_csv(const std::filesystem::path& path);
std::vector<IterationError> read_curve_csv(std::istream& in);

} // namespace cann::scaling
