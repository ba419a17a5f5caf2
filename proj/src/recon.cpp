#include "cann/recon.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace cann::recon {

void Cann::validate() const {
  if (mpn.stress_unit_pa != stress_unit_pa)
    throw ConfigError("material network stress unit " + fmt_double(mpn.stress_unit_pa) +
                      " Pa does not match the model's " + fmt_double(stress_unit_pa) + " Pa");
}

void save(const std::filesystem::path& dir, const Cann& c) {
  c.validate();
  std::filesystem::create_directories(dir);
  mpn::write(dir / "mpn.net", c.mpn);
  sn::write(dir / "sn.net", c.sn);
}

Cann load(const std::filesystem::path& dir) {
  Cann c;
  c.mpn = mpn::read(dir / "mpn.net");
  c.sn = sn::read(dir / "sn.net");
  c.stress_unit_pa = c.mpn.stress_unit_pa;
  return c;
}

Point2 ModulusImage::point(std::size_t r, std::size_t c) const {
  const double fx = grid.cols > 1 ? static_cast<double>(c) / static_cast<double>(grid.cols - 1) : 0.5;
  const double fy = grid.rows > 1 ? static_cast<double>(r) / static_cast<double>(grid.rows - 1) : 0.5;
  return {extent.lo.x + fx * extent.width(), extent.hi.y - fy * extent.height()};
}

double ModulusImage::sample(Point2 p) const {
  auto coord = [](double v, double lo, double span, std::size_t n, std::size_t& i0, double& t) {
    double u = n > 1 ? (v - lo) / span * static_cast<double>(n - 1) : 0.0;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<std::size_t>(u), n > 1 ? n - 2 : 0);
    t = n > 1 ? u - static_cast<double>(i0) : 0.0;
  };
  std::size_t c0, r0;
  double tx, ty;
  coord(p.x, extent.lo.x, extent.width(), grid.cols, c0, tx);
  coord(extent.hi.y - p.y, 0.0, extent.height(), grid.rows, r0, ty);
  const std::size_t c1 = std::min(c0 + 1, grid.cols - 1), r1 = std::min(r0 + 1, grid.rows - 1);
  const double top = (1 - tx) * grid.at(r0, c0) + tx * grid.at(r0, c1);
  const double bot = (1 - tx) * grid.at(r1, c0) + tx * grid.at(r1, c1);
  return (1 - ty) * top + ty * bot;
}

void check_probe_strain(const StrainVector& probe, double poisson) {
  for (double v : probe.c)
    if (!std::isfinite(v) || std::abs(v) > 0.2)
      throw ConfigError("probe strain components must lie within +-0.2");
  if (poisson * probe[0] + probe[1] == 0.0)
    throw ConfigError("probe strain has nu*e11 + e22 = 0; the modulus cannot be recovered");
}

double invert_plane_stress(const StressVector& stress, const StrainVector& probe, double poisson) {
  return stress[1] * (1.0 - poisson * poisson) / (poisson * probe[0] + probe[1]);
}

ModulusImage reconstruct(const Cann& c, std::size_t rows, std::size_t cols, const StrainVector& probe) {
  c.validate();
  check_probe_strain(probe);
  if (rows < 2 || cols < 2)
    throw ConfigError("reconstruction grid needs at least 2 x 2 points");
  ModulusImage img;
  img.grid = Grid(rows, cols);
  const Point2 ctr = c.sn.normalizer.center();
  img.extent = {{ctr.x - c.sn.normalizer.half_width(), ctr.y - c.sn.normalizer.half_height()},
                {ctr.x + c.sn.normalizer.half_width(), ctr.y + c.sn.normalizer.half_height()}};
  img.probe_strain = probe;
  img.stress_unit_pa = c.stress_unit_pa;
  std::vector<Point2> pts;
  pts.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t q = 0; q < cols; ++q)
      pts.push_back(img.point(r, q));
  const auto scales = c.sn.predict(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double e = invert_plane_stress(c.mpn.predict_stress(probe, scales[i]), probe);
    img.grid.values[i] = e;
    if (!(e > 0.0) || !std::isfinite(e))
      ++img.nonpositive;
  }
  return img;
}

Score score(const ModulusImage& image, const phantom::ModulusField& target) {
  const double w = target.width_mm(), h = target.height_mm();
  constexpr double tol = 1e-6;
  if (image.extent.lo.x > tol || image.extent.lo.y > tol || image.extent.hi.x < w - tol ||
      image.extent.hi.y < h - tol)
    throw ConfigError("image extent does not cover the target domain");
  std::size_t rows = 101, cols = 101;
  bool centres = false;
  if (auto g = target.native_grid()) {
    rows = g->first;
    cols = g->second;
    centres = true;
  }
  Score s;
  s.error_map = Grid(rows, cols);
  double sum = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const Point2 p = centres ? Point2{(static_cast<double>(c) + 0.5) * w / static_cast<double>(cols),
                                        h - (static_cast<double>(r) + 0.5) * h / static_cast<double>(rows)}
                               : Point2{static_cast<double>(c) * w / static_cast<double>(cols - 1),
                                        h - static_cast<double>(r) * h / static_cast<double>(rows - 1)};
      const double et = target.eval(p);
      const double e = std::abs(et - image.sample(p)) / et;
      s.error_map.at(r, c) = e;
      sum += e;
    }
  const double n = static_cast<double>(rows * cols);
  s.mean = sum / n;
  double var = 0.0;
  for (double e : s.error_map.values)
    var += (e - s.mean) * (e - s.mean);
  s.std = std::sqrt(var / n);
  return s;
}

void write_image_csv(std::ostream& out, const ModulusImage& img) {
  out << "# cann-image 1\n";
  out << "# extent_mm: " << fmt_double(img.extent.lo.x) << ' ' << fmt_double(img.extent.lo.y) << ' '
      << fmt_double(img.extent.hi.x) << ' ' << fmt_double(img.extent.hi.y) << '\n';
  out << "# probe_strain: " << fmt_double(img.probe_strain[0]) << ' ' << fmt_double(img.probe_strain[1]) << ' '
      << fmt_double(img.probe_strain[2]) << '\n';
  out << "# stress_unit_pa: " << fmt_double(img.stress_unit_pa) << '\n';
  out << "# modulus_unit: Pa\n";
  out << "# rows_cols: " << img.grid.rows << ' ' << img.grid.cols << '\n';
  for (std::size_t r = 0; r < img.grid.rows; ++r) {
    for (std::size_t c = 0; c < img.grid.cols; ++c)
      out << (c ? "," : "") << fmt_double(img.grid.at(r, c));
    out << '\n';
  }
}

void write_image_csv(const std::filesystem::path& path, const ModulusImage& img) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  write_image_csv(out, img);
}

namespace {

std::vector<double> header_numbers(const std::string& line, std::size_t n) {
  std::istringstream ls(line.substr(line.find(':') + 1));
  std::vector<double> v;
  for (std::string w; ls >> w;) {
    double x;
    if (!parse_double(w, x))
      throw ConfigError("image header: bad number '" + w + "'");
    v.push_back(x);
  }
  if (v.size() != n)
    throw ConfigError("image header: expected " + std::to_string(n) + " numbers in '" + line + "'");
  return v;
}

} // namespace

ModulusImage read_image_csv(std::istream& in) {
  ModulusImage img;
  std::string line;
  if (!std::getline(in, line) || line != "# cann-image 1")
    throw ConfigError("not a cann-image 1 file");
  bool have_extent = false, have_size = false;
  std::vector<double> vals;
  std::size_t width = 0, nrows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      if (line.rfind("# extent_mm:", 0) == 0) {
        auto v = header_numbers(line, 4);
        img.extent = {{v[0], v[1]}, {v[2], v[3]}};
        have_extent = true;
      } else if (line.rfind("# probe_strain:", 0) == 0) {
        auto v = header_numbers(line, 3);
        img.probe_strain = {{v[0], v[1], v[2]}};
      } else if (line.rfind("# stress_unit_pa:", 0) == 0) {
        img.stress_unit_pa = header_numbers(line, 1)[0];
      } else if (line.rfind("# rows_cols:", 0) == 0) {
        auto v = header_numbers(line, 2);
        img.grid = Grid(static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]));
        have_size = true;
      }
      continue;
    }
    std::stringstream ls(line);
    std::size_t n = 0;
    for (std::string t; std::getline(ls, t, ',');) {
      double x;
      if (!parse_double(t, x))
        throw ConfigError("image: bad number '" + t + "'");
      vals.push_back(x);
      ++n;
    }
    if (width == 0)
      width = n;
    else if (n != width)
      throw ConfigError("image: ragged row " + std::to_string(nrows + 1));
    ++nrows;
  }
  if (!have_extent || !have_size)
    throw ConfigError("image: missing extent or size header");
  if (nrows != img.grid.rows || width != img.grid.cols)
    throw ConfigError("image: data does not match the rows_cols header");
  img.grid.values = std::move(vals);
  for (double e : img.grid.values)
    if (!(e > 0.0) || !std::isfinite(e))
      ++img.nonpositive;
  return img;
}

ModulusImage read_image_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  return read_image_csv(in);
}

Window render(const ModulusImage& img, const std::filesystem::path& stem, Window window) {
  if (img.grid.empty())
    throw ConfigError("cannot render an empty image");
  if (!(window.lo < window.hi)) {
    const auto [lo, hi] = std::minmax_element(img.grid.values.begin(), img.grid.values.end());
    window = {*lo, *hi};
  }
  auto with = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  write_image_csv(with(".csv"), img);
  write_pgm(with(".pgm"), img.grid, window.lo, window.hi);
  nlohmann::ordered_json j;
  j["window_lo_pa"] = window.lo;
  j["window_hi_pa"] = window.hi;
  j["rows"] = img.grid.rows;
  j["cols"] = img.grid.cols;
  j["extent_mm"] = {img.extent.lo.x, img.extent.lo.y, img.extent.hi.x, img.extent.hi.y};
  std::ofstream out(with(".window.json"));
  if (!out)
    throw ConfigError("cannot write " + with(".window.json").string());
  out << j.dump(2) << '\n';
  return window;
}

} // namespace cann::recon
