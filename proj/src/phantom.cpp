#include "cann/phantom.hpp"

#include "cann/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace cann::phantom {

std::string_view to_string(ModelTag t) {
  switch (t) {
  case ModelTag::gaussian_inclusion:
    return "gaussian_inclusion";
  case ModelTag::three_inclusion:
    return "three_inclusion";
  case ModelTag::region_labeled:
    return "region_labeled";
  case ModelTag::image_derived:
    return "image_derived";
  }
  return "?";
}

void NoiseSpec::validate() const {
  if (!(relative_magnitude >= 0.0 && relative_magnitude < 1.0))
    throw ConfigError("noise relative_magnitude must lie in [0, 1)");
}

struct ModulusField::Impl {
  double width = 0.0;
  double height = 0.0;
  ModelTag tag{};
  virtual ~Impl() = default;
  virtual double eval(double x, double y) const = 0;
  virtual std::optional<std::pair<std::size_t, std::size_t>> native() const { return std::nullopt; }
};

ModulusField::ModulusField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

namespace {

const ModulusField::Impl& checked(const std::shared_ptr<const ModulusField::Impl>& p) {
  if (!p)
    throw ConfigError("modulus field is not initialised");
  return *p;
}

void check_domain(double w, double h) {
  if (!(w > 0.0) || !(h > 0.0))
    throw ConfigError("phantom domain must have positive width and height");
}

struct Gaussian final : ModulusField::Impl {
  double peak, bg, sigma;
  Point2 c;
  double eval(double x, double y) const override {
    const double r2 = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
    return bg + (peak - bg) * std::exp(-r2 / (2.0 * sigma * sigma));
  }
};

struct Discs final : ModulusField::Impl {
  double bg;
  std::vector<Disc> discs; // sorted by radius, smallest first
  double eval(double x, double y) const override {
    for (const auto& d : discs) {
      const double dx = x - d.center.x, dy = y - d.center.y;
      if (dx * dx + dy * dy <= d.radius_mm * d.radius_mm)
        return d.modulus_pa;
    }
    return bg;
  }
};

// Continuous pixel coordinates: pixel (r, c) has its centre at (c + 0.5, r + 0.5)
// with row 0 at the top edge of the domain.
struct Raster : ModulusField::Impl {
  Grid grid;
  double col_of(double x) const { return x / width * static_cast<double>(grid.cols); }
  double row_of(double y) const { return (height - y) / height * static_cast<double>(grid.rows); }
  std::optional<std::pair<std::size_t, std::size_t>> native() const override {
    return std::make_pair(grid.rows, grid.cols);
  }
};

struct Image final : Raster {
  double eval(double x, double y) const override {
    const double fc = std::clamp(col_of(x) - 0.5, 0.0, static_cast<double>(grid.cols - 1));
    const double fr = std::clamp(row_of(y) - 0.5, 0.0, static_cast<double>(grid.rows - 1));
    const auto c0 = static_cast<std::size_t>(fc), r0 = static_cast<std::size_t>(fr);
    const std::size_t c1 = std::min(c0 + 1, grid.cols - 1), r1 = std::min(r0 + 1, grid.rows - 1);
    const double tc = fc - static_cast<double>(c0), tr = fr - static_cast<double>(r0);
    const double top = (1.0 - tc) * grid.at(r0, c0) + tc * grid.at(r0, c1);
    const double bot = (1.0 - tc) * grid.at(r1, c0) + tc * grid.at(r1, c1);
    return (1.0 - tr) * top + tr * bot;
  }
};

struct Labels final : Raster {
  double eval(double x, double y) const override {
    const auto last_c = static_cast<double>(grid.cols - 1), last_r = static_cast<double>(grid.rows - 1);
    const auto c = static_cast<std::size_t>(std::clamp(std::floor(col_of(x)), 0.0, last_c));
    const auto r = static_cast<std::size_t>(std::clamp(std::floor(row_of(y)), 0.0, last_r));
    return grid.at(r, c);
  }
};

struct Noisy final : ModulusField::Impl {
  ModulusField base;
  std::vector<Point2> sites;
  std::vector<double> mult;
  double eval(double x, double y) const override {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const double d = (sites[i].x - x) * (sites[i].x - x) + (sites[i].y - y) * (sites[i].y - y);
      if (d < best_d) {
        best_d = d;
        best = i;
        if (d == 0.0)
          break;
      }
    }
    return base.eval(x, y) * mult[best];
  }
  std::optional<std::pair<std::size_t, std::size_t>> native() const override {
    return base.native_grid();
  }
};

} // namespace

double ModulusField::width_mm() const { return checked(impl_).width; }
double ModulusField::height_mm() const { return checked(impl_).height; }
ModelTag ModulusField::tag() const { return checked(impl_).tag; }
double ModulusField::eval(double x, double y) const { return checked(impl_).eval(x, y); }
std::optional<std::pair<std::size_t, std::size_t>> ModulusField::native_grid() const {
  return checked(impl_).native();
}

ModulusField make_gaussian_inclusion(double width_mm, double height_mm, double peak_pa,
                                     double background_pa, Point2 center, double sigma_mm) {
  check_domain(width_mm, height_mm);
  if (!(background_pa > 0.0) || !(peak_pa >= background_pa) || !(sigma_mm > 0.0))
    throw ConfigError("gaussian inclusion needs peak >= background > 0 and sigma > 0");
  auto g = std::make_shared<Gaussian>();
  g->width = width_mm;
  g->height = height_mm;
  g->tag = ModelTag::gaussian_inclusion;
  g->peak = peak_pa;
  g->bg = background_pa;
  g->sigma = sigma_mm;
  g->c = center;
  return ModulusField(g);
}

ModulusField make_three_inclusion(double width_mm, double height_mm, double background_pa,
                                  std::vector<Disc> discs) {
  check_domain(width_mm, height_mm);
  if (!(background_pa > 0.0))
    throw ConfigError("inclusion background modulus must be positive");
  for (const auto& d : discs) {
    if (!(d.modulus_pa > 0.0) || !(d.radius_mm > 0.0))
      throw ConfigError("inclusion discs need a positive radius and modulus");
    if (d.center.x - d.radius_mm < 0.0 || d.center.x + d.radius_mm > width_mm ||
        d.center.y - d.radius_mm < 0.0 || d.center.y + d.radius_mm > height_mm)
      throw ConfigError("inclusion disc at (" + std::to_string(d.center.x) + ", " +
                        std::to_string(d.center.y) + ") extends outside the domain");
  }
  std::stable_sort(discs.begin(), discs.end(),
                   [](const Disc& a, const Disc& b) { return a.radius_mm < b.radius_mm; });
  auto f = std::make_shared<Discs>();
  f->width = width_mm;
  f->height = height_mm;
  f->tag = ModelTag::three_inclusion;
  f->bg = background_pa;
  f->discs = std::move(discs);
  return ModulusField(f);
}

ModulusField make_image_derived(double width_mm, double height_mm, Grid intensity, double e_min_pa,
                                double e_max_pa) {
  check_domain(width_mm, height_mm);
  if (intensity.empty())
    throw ConfigError("image-derived phantom needs a non-empty image");
  if (!(e_min_pa > 0.0) || !(e_max_pa > e_min_pa))
    throw ConfigError("image-derived phantom needs e_max > e_min > 0");
  const auto [lo_it, hi_it] = std::minmax_element(intensity.values.begin(), intensity.values.end());
  const double lo = *lo_it, hi = *hi_it;
  for (double& v : intensity.values)
    v = hi > lo ? e_min_pa + (v - lo) / (hi - lo) * (e_max_pa - e_min_pa) : 0.5 * (e_min_pa + e_max_pa);
  auto f = std::make_shared<Image>();
  f->width = width_mm;
  f->height = height_mm;
  f->tag = ModelTag::image_derived;
  f->grid = std::move(intensity);
  return ModulusField(f);
}

ModulusField make_region_labeled(double width_mm, double height_mm, Grid labels,
                                 std::map<int, double> region_moduli_pa) {
  check_domain(width_mm, height_mm);
  if (labels.empty())
    throw ConfigError("region-labeled phantom needs a non-empty label grid");
  for (const auto& [label, e] : region_moduli_pa)
    if (!(e > 0.0))
      throw ConfigError("region " + std::to_string(label) + " has a non-positive modulus");
  for (double& v : labels.values) {
    const double r = std::round(v);
    if (r != v)
      throw ConfigError("label grid contains a non-integer value");
    auto it = region_moduli_pa.find(static_cast<int>(r));
    if (it == region_moduli_pa.end())
      throw ConfigError("label " + std::to_string(static_cast<int>(r)) + " has no modulus entry");
    v = it->second;
  }
  auto f = std::make_shared<Labels>();
  f->width = width_mm;
  f->height = height_mm;
  f->tag = ModelTag::region_labeled;
  f->grid = std::move(labels);
  return ModulusField(f);
}

std::vector<double> noise_multipliers(const NoiseSpec& spec, std::size_t n) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.rng_seed), static_cast<std::uint32_t>(spec.rng_seed >> 32),
                    static_cast<std::uint32_t>(spec.draw_id), static_cast<std::uint32_t>(spec.draw_id >> 32),
                    0x6e6f6973u};
  std::mt19937_64 rng(seq);
  std::vector<double> out(n);
  for (auto& m : out) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = 1.0 + spec.relative_magnitude * (2.0 * u - 1.0);
  }
  return out;
}

ModulusField apply_noise(const ModulusField& field, const NoiseSpec& spec,
                         const std::vector<Point2>& sites) {
  spec.validate();
  if (spec.relative_magnitude == 0.0)
    return field;
  if (sites.empty())
    throw ConfigError("noise needs at least one sampling site");
  auto f = std::make_shared<Noisy>();
  f->width = field.width_mm();
  f->height = field.height_mm();
  f->tag = field.tag();
  f->base = field;
  f->sites = sites;
  f->mult = noise_multipliers(spec, sites.size());
  return ModulusField(f);
}

std::vector<double> sample(const ModulusField& field, const std::vector<Point2>& sites) {
  std::vector<double> out;
  out.reserve(sites.size());
  for (const auto& p : sites)
    out.push_back(field.eval(p));
  return out;
}

double psnr_db(const std::vector<double>& clean, const std::vector<double>& noisy) {
  if (clean.size() != noisy.size() || clean.empty())
    throw ConfigError("PSNR needs two equally sized, non-empty samples");
  double peak = 0.0, se = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    peak = std::max(peak, clean[i]);
    se += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
  }
  const double rms = std::sqrt(se / static_cast<double>(clean.size()));
  return rms > 0.0 ? 20.0 * std::log10(peak / rms) : std::numeric_limits<double>::infinity();
}

namespace {

std::filesystem::path resolve(const std::string& name, const std::filesystem::path& base_dir) {
  std::filesystem::path p(name);
  if (p.is_absolute())
    return p;
  if (!base_dir.empty() && std::filesystem::exists(base_dir / p))
    return base_dir / p;
  const std::filesystem::path shipped = std::filesystem::path(CANN_DATA_DIR) / "phantoms" / p;
  if (std::filesystem::exists(shipped))
    return shipped;
  if (std::filesystem::exists(p))
    return p;
  throw ConfigError("cannot find phantom raster '" + name + "'");
}

Point2 point(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError("expected a [x, y] pair in mm");
  return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace

ModulusField from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    const std::string model = j.at("model").get<std::string>();
    const double w = j.value("width_mm", 50.0);
    const double h = j.value("height_mm", 50.0);
    if (model == "gaussian_inclusion") {
      const Point2 c = j.contains("center_mm") ? point(j["center_mm"]) : Point2{w / 2.0, h / 2.0};
      return make_gaussian_inclusion(w, h, j.value("peak_pa", 30e3), j.value("background_pa", 10e3), c,
                                     j.value("sigma_mm", 6.0));
    }
    if (model == "three_inclusion") {
      std::vector<Disc> discs;
      for (const auto& d : j.value("discs", nlohmann::json::array()))
        discs.push_back({point(d.at("center_mm")), d.at("radius_mm").get<double>(),
                         d.at("modulus_pa").get<double>()});
      return make_three_inclusion(w, h, j.value("background_pa", 8e3), std::move(discs));
    }
    if (model == "image_derived") {
      Grid g = read_raster(resolve(j.at("image").get<std::string>(), base_dir));
      return make_image_derived(w, h, std::move(g), j.value("e_min_pa", 8e3), j.value("e_max_pa", 30e3));
    }
    if (model == "region_labeled") {
      Grid g = read_raster(resolve(j.at("labels").get<std::string>(), base_dir));
      std::map<int, double> moduli;
      for (const auto& [k, v] : j.at("moduli_pa").items())
        moduli[std::stoi(k)] = v.get<double>();
      return make_region_labeled(w, h, std::move(g), std::move(moduli));
    }
    throw ConfigError("unknown phantom model '" + model + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("phantom config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("phantom config: region labels must be integers");
  }
}

ModulusField load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open phantom config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("phantom config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

} // namespace cann::phantom
