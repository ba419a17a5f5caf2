#pragma once

#include "cann/femesh.hpp"
#include "cann/mlp.hpp"
#include "cann/scaling.hpp"
#include "cann/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cann::sn {

struct SnTrainSpec {
  int iterations = 10;
  int epochs = 300;
  double learning_rate = 0.03;
  double target_lo = 0.1;
  double target_hi = 0.8;
  std::uint64_t seed = 1;

  static SnTrainSpec test1();
  static SnTrainSpec test2();
  void validate() const;
};

// Coordinates (mm) -> strain scale. The network sees normalized coordinates
// and emits values in (0, 1); S_k = gain_k * y_k + offset_k.
struct SpatialNet {
  mlp::MlpNet net;
  Vec3 gain{};
  Vec3 offset{};
  femesh::CoordNormalizer normalizer;

  static mlp::MlpNet make_net();

  Vec3 predict(Point2 p) const;
  std::vector<Vec3> predict(const std::vector<Point2>& points) const;
  Vec3 decode(const Vec3& y) const;
};

struct FitResult {
  SpatialNet sn;
  // One entry per epoch over all iterations.
  std::vector<double> loss_trace;
  // Mean squared error of each output against its compressed target.
  Vec3 first_loss{};
  Vec3 final_loss{};
};

FitResult fit(const scaling::ScalingField& field, const femesh::QuadMesh& mesh, const SnTrainSpec& spec);

inline Vec3 predict_scale(const SpatialNet& sn, Point2 p) { return sn.predict(p); }

void write(std::ostream& out, const SpatialNet& sn);
void write(const std::filesystem::path& path, const SpatialNet& sn);
SpatialNet read(std::istream& in);
SpatialNet read(const std::filesystem::path& path);

} // namespace cann::sn
