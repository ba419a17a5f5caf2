#pragma once

#include "cann/types.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cann {

struct Sample {
  Point2 coord; // mm
  int step = 0; // 1-based load step
  StressVector stress; // Pa
  StrainVector strain;
  bool augmented = false;
};

struct SampleSet {
  std::vector<Sample> records;
  // Pa per internal stress unit of whatever network consumes this data; metadata only.
  double stress_unit_pa = 1e4;

  std::size_t size() const { return records.size(); }
};

// Appends a copy of every record with components 11 and 22 of stress and strain
// swapped; shear is multiplied by shear_sign (+1 keeps it, -1 is the exact rotation).
SampleSet augment_frame_invariance(const SampleSet& in, double shear_sign = 1.0);

// Records sharing a coordinate, in order of first appearance.
struct SampleGroup {
  Point2 coord;
  std::vector<std::size_t> indices;
};
std::vector<SampleGroup> group_by_coord(const SampleSet& s);

// CSV with header x_mm,y_mm,step,s11,s22,s12,e11,e22,e12,aug, preceded by a
// "# stress_unit_pa: <value>" comment line.
void write_csv(std::ostream& out, const SampleSet& s);
void write_csv(const std::filesystem::path& path, const SampleSet& s);
// expected_unit_pa > 0 turns a unit mismatch into a ConfigError.
SampleSet read_csv(std::istream& in, double expected_unit_pa = 0.0);
SampleSet read_csv(const std::filesystem::path& path, double expected_unit_pa = 0.0);

} // namespace cann
