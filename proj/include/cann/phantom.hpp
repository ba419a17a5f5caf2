#pragma once

#include "cann/grid_io.hpp"
#include "cann/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cann::phantom {

enum class ModelTag { gaussian_inclusion, three_inclusion, region_labeled, image_derived };

std::string_view to_string(ModelTag t);

struct Disc {
  Point2 center;
  double radius_mm = 0.0;
  double modulus_pa = 0.0;
};

struct NoiseSpec {
  double relative_magnitude = 0.0;
  std::uint64_t rng_seed = 0;
  std::uint64_t draw_id = 1;
  void validate() const;
};

// Young's modulus over [0, width] x [0, height] (mm), values in Pa.
class ModulusField {
public:
  struct Impl;

  ModulusField() = default;
  explicit ModulusField(std::shared_ptr<const Impl> impl);

  double width_mm() const;
  double height_mm() const;
  ModelTag tag() const;
  bool valid() const { return impl_ != nullptr; }

  double eval(double x_mm, double y_mm) const;
  double eval(Point2 p) const { return eval(p.x, p.y); }

  // (rows, cols) of the source raster for image and label models.
  std::optional<std::pair<std::size_t, std::size_t>> native_grid() const;

private:
  std::shared_ptr<const Impl> impl_;
};

ModulusField make_gaussian_inclusion(double width_mm, double height_mm, double peak_pa,
                                     double background_pa, Point2 center, double sigma_mm);
ModulusField make_three_inclusion(double width_mm, double height_mm, double background_pa,
                                  std::vector<Disc> discs);
// Pixel centres carry the mapped intensities; bilinear in between, clamped at the border.
// A constant image maps to the midpoint of [e_min, e_max].
ModulusField make_image_derived(double width_mm, double height_mm, Grid intensity, double e_min_pa,
                                double e_max_pa);
// Nearest-pixel label lookup.
ModulusField make_region_labeled(double width_mm, double height_mm, Grid labels,
                                 std::map<int, double> region_moduli_pa);

// E' = E (1 + p) with p ~ U(-m, m), one draw per site in the given order. Points
// other than the sites take the multiplier of the nearest site.
ModulusField apply_noise(const ModulusField& field, const NoiseSpec& spec,
                         const std::vector<Point2>& sites);

// The multipliers (1 + p) apply_noise would use for n sites.
std::vector<double> noise_multipliers(const NoiseSpec& spec, std::size_t n);

std::vector<double> sample(const ModulusField& field, const std::vector<Point2>& sites);

// 20 log10(max clean / RMS(noisy - clean)).
double psnr_db(const std::vector<double>& clean, const std::vector<double>& noisy);

// Phantom description, e.g. {"model": "gaussian_inclusion", "peak_pa": 30000, ...}.
// Relative raster paths are resolved against base_dir, then the shipped data directory.
ModulusField from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ModulusField load_config(const std::filesystem::path& path);

} // namespace cann::phantom
