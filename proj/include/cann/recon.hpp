#pragma once

#include "cann/femesh.hpp"
#include "cann/grid_io.hpp"
#include "cann/mpn.hpp"
#include "cann/phantom.hpp"
#include "cann/sn.hpp"
#include "cann/types.hpp"

#include <filesystem>
#include <iosfwd>

namespace cann::recon {

inline constexpr double kPoisson = 0.5;

inline StrainVector default_probe_strain() { return StrainVector{{0.003, 0.005, 0.0001}}; }

struct Cann {
  mpn::MaterialPropertyNet mpn;
  sn::SpatialNet sn;
  double stress_unit_pa = 1e4;

  void validate() const;
};

// Directory holding mpn.net and sn.net.
void save(const std::filesystem::path& dir, const Cann& c);
Cann load(const std::filesystem::path& dir);

// Young's modulus on a rows x cols lattice spanning the extent, edges included;
// row 0 is the top edge (largest y).
struct ModulusImage {
  Grid grid; // Pa
  femesh::BoundingBox extent;
  StrainVector probe_strain;
  double stress_unit_pa = 1e4;
  // Entries that came out <= 0 or non-finite; left as computed.
  std::size_t nonpositive = 0;

  Point2 point(std::size_t r, std::size_t c) const;
  // Bilinear interpolation; p is clamped into the extent.
  double sample(Point2 p) const;
};

// Modulus from a stress response to a probe strain by inverting the plane-stress law.
double invert_plane_stress(const StressVector& stress, const StrainVector& probe, double poisson = kPoisson);
void check_probe_strain(const StrainVector& probe, double poisson = kPoisson);

ModulusImage reconstruct(const Cann& c, std::size_t rows, std::size_t cols,
                         const StrainVector& probe = default_probe_strain());

struct Score {
  double mean = 0.0;
  double std = 0.0; // population
  Grid error_map;
};

// Relative error |E_target - E_image| / E_target on the target's native raster
// (pixel centres) when it has one, otherwise on a 101 x 101 lattice over the target.
Score score(const ModulusImage& image, const phantom::ModulusField& target);

void write_image_csv(std::ostream& out, const ModulusImage& img);
void write_image_csv(const std::filesystem::path& path, const ModulusImage& img);
ModulusImage read_image_csv(std::istream& in);
ModulusImage read_image_csv(const std::filesystem::path& path);

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

// <stem>.csv, <stem>.pgm and <stem>.window.json. A window with lo >= hi uses the
// image range.
Window render(const ModulusImage& img, const std::filesystem::path& stem, Window window = {});

} // namespace cann::recon
