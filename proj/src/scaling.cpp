#include "cann/scaling.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"
#include "csv_table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cann::scaling {

void GdConfig::validate() const {
  if (iterations < 1)
    throw ConfigError("gradient iterations must be at least 1");
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw ConfigError("eta must be positive");
  if (!(s_floor > 0.0))
    throw ConfigError("s_floor must be positive");
  if (!(eta_stress_unit_pa > 0.0))
    throw ConfigError("eta_stress_unit_pa must be positive");
}

namespace {

// e . (inner sum for component k), both in eta_stress_unit_pa units, summed over samples.
// Also returns sum |e|^2 in Pa^2.
struct Accum {
  double dot = 0.0;
  double sq = 0.0;
};

Accum accumulate_exact(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples, const Vec3& s,
                       int k, double unit) {
  const double pa = m.stress_scale * m.stress_unit_pa;
  Accum a;
  for (const auto& smp : samples) {
    const Vec3 x{smp.strain[0] / s[0], smp.strain[1] / s[1], smp.strain[2] / s[2]};
    const Vec3 y = m.core(x);
    const Mat3 j = m.core_jacobian(x);
    for (int i = 0; i < 3; ++i) {
      const double d = smp.target[i] - pa * y[i];
      a.sq += d * d;
      a.dot += (d / unit) * (pa / unit) * j[i][k] * x[k];
    }
  }
  return a;
}

// Only forward evaluations are needed here, so the current and the masked
// inputs of all samples go through the network as one batch.
Accum accumulate_masked(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples, const Vec3& s,
                        int k, double unit, std::vector<double>& buf) {
  const std::size_t n = samples.size();
  buf.assign(6 * n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c)
      buf[3 * p + c] = samples[p].strain[c] / s[c];
    buf[3 * (n + p) + k] = buf[3 * p + k];
  }
  const std::vector<double> y = m.net.forward_batch(buf, 2 * n);
  const double pa = m.stress_scale * m.stress_unit_pa;
  Accum a;
  for (std::size_t p = 0; p < n; ++p)
    for (int i = 0; i < 3; ++i) {
      const double d = samples[p].target[i] - pa * y[3 * p + i];
      a.sq += d * d;
      a.dot += (d / unit) * (pa / unit) * y[3 * (n + p) + i];
    }
  return a;
}

double update_unit_pa(std::span<const PointSample> samples, const GdConfig& cfg) {
  if (cfg.stress_unit == UpdateUnit::fixed)
    return cfg.eta_stress_unit_pa;
  double sq = 0.0;
  for (const auto& p : samples)
    sq += p.target[0] * p.target[0] + p.target[1] * p.target[1] + p.target[2] * p.target[2];
  const double u = std::sqrt(sq / static_cast<double>(samples.size()));
  return u > 0.0 ? u : cfg.eta_stress_unit_pa;
}

PointResult iterate(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples, const Vec3& start,
                    const GdConfig& cfg, bool exact) {
  cfg.validate();
  mpn::check_scale(start);
  if (samples.empty())
    throw ConfigError("scaling update needs at least one sample");
  const double n = static_cast<double>(samples.size());
  const double unit = update_unit_pa(samples, cfg);
  PointResult r;
  r.scale = start;
  r.rms.reserve(cfg.iterations + 1);
  std::vector<double> buf;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int k = 0; k < 3; ++k) {
      const Accum a = exact ? accumulate_exact(m, samples, r.scale, k, unit)
                            : accumulate_masked(m, samples, r.scale, k, unit, buf);
      if (k == 0)
        r.rms.push_back(std::sqrt(a.sq / n));
      const double next = r.scale[k] - cfg.eta * a.dot / n;
      if (!std::isfinite(next))
        throw NumericError("non-finite scale update at iteration " + std::to_string(it + 1));
      r.scale[k] = std::max(next, cfg.s_floor);
    }
  }
  r.rms.push_back(rms_error(m, samples, r.scale));
  return r;
}

} // namespace

PointResult update_point(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples,
                         const Vec3& start, const GdConfig& cfg) {
  return iterate(m, samples, start, cfg, false);
}

PointResult update_point_exact(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples,
                               const Vec3& start, const GdConfig& cfg) {
  return iterate(m, samples, start, cfg, true);
}

Vec3 update_direction(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples,
                      const Vec3& scale, const GdConfig& cfg, bool exact) {
  cfg.validate();
  mpn::check_scale(scale);
  if (samples.empty())
    throw ConfigError("scaling update needs at least one sample");
  Vec3 d;
  std::vector<double> buf;
  const double unit = update_unit_pa(samples, cfg);
  for (int k = 0; k < 3; ++k) {
    const Accum a = exact ? accumulate_exact(m, samples, scale, k, unit)
                          : accumulate_masked(m, samples, scale, k, unit, buf);
    d[k] = -cfg.eta * a.dot / static_cast<double>(samples.size());
  }
  return d;
}

double rms_error(const mpn::MaterialPropertyNet& m, std::span<const PointSample> samples, const Vec3& scale) {
  double sq = 0.0;
  for (const auto& smp : samples) {
    const StressVector p = m.predict_stress(smp.strain, scale);
    for (int i = 0; i < 3; ++i)
      sq += (smp.target[i] - p[i]) * (smp.target[i] - p[i]);
  }
  return std::sqrt(sq / static_cast<double>(samples.size()));
}

std::vector<std::vector<PointSample>> group_samples(const SampleSet& s, std::vector<Point2>* coords) {
  std::vector<std::vector<PointSample>> out;
  if (coords)
    coords->clear();
  for (const auto& g : group_by_coord(s)) {
    auto& v = out.emplace_back();
    for (std::size_t i : g.indices)
      v.push_back({s.records[i].stress, s.records[i].strain});
    if (coords)
      coords->push_back(g.coord);
  }
  return out;
}

ScalingField compute_field(const mpn::MaterialPropertyNet& m, const SampleSet& samples, const GdConfig& cfg) {
  cfg.validate();
  ScalingField f;
  f.config = cfg;
  const auto groups = group_samples(samples, &f.coords);
  if (groups.empty())
    throw ConfigError("scaling field needs at least one sample");
  std::vector<std::vector<double>> curves;
  curves.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    PointResult r;
    try {
      r = cfg.use_exact_gradient ? update_point_exact(m, groups[g], {1, 1, 1}, cfg)
                                 : update_point(m, groups[g], {1, 1, 1}, cfg);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at (" + fmt_double(f.coords[g].x) + ", " +
                         fmt_double(f.coords[g].y) + ") mm");
    }
    f.scales.push_back(r.scale);
    curves.push_back(std::move(r.rms));
  }
  f.curve.resize(cfg.iterations + 1);
  for (int it = 0; it <= cfg.iterations; ++it) {
    IterationError e{curves[0][it], curves[0][it], 0.0};
    for (const auto& c : curves) {
      e.min = std::min(e.min, c[it]);
      e.max = std::max(e.max, c[it]);
      e.mean += c[it];
    }
    e.mean /= static_cast<double>(curves.size());
    f.curve[it] = e;
  }
  return f;
}

namespace {
constexpr const char* kFieldHeader = "x_mm,y_mm,S1,S2,S3";
constexpr const char* kCurveHeader = "iter,min_rms,max_rms,mean_rms";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  return in;
}
} // namespace

void write_field_csv(std::ostream& out, const ScalingField& f) {
  out << kFieldHeader << '\n';
  for (std::size_t i = 0; i < f.size(); ++i)
    out << fmt_double(f.coords[i].x) << ',' << fmt_double(f.coords[i].y) << ',' << fmt_double(f.scales[i][0])
        << ',' << fmt_double(f.scales[i][1]) << ',' << fmt_double(f.scales[i][2]) << '\n';
}

void write_field_csv(const std::filesystem::path& path, const ScalingField& f) {
  auto out = open_out(path);
  write_field_csv(out, f);
}

void write_curve_csv(std::ostream& out, const ScalingField& f) {
  out << kCurveHeader << '\n';
  for (std::size_t i = 0; i < f.curve.size(); ++i)
    out << i << ',' << fmt_double(f.curve[i].min) << ',' << fmt_double(f.curve[i].max) << ','
        << fmt_double(f.curve[i].mean) << '\n';
}

void write_curve_csv(const std::filesystem::path& path, const ScalingField& f) {
  auto out = open_out(path);
  write_curve_csv(out, f);
}

ScalingField read_field_csv(std::istream& in) {
  ScalingField f;
  for (const auto& r : detail::read_numeric_csv(in, kFieldHeader, "scaling field")) {
    f.coords.push_back({r[0], r[1]});
    f.scales.push_back({r[2], r[3], r[4]});
  }
  return f;
}

ScalingField read_field_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_field_csv(in);
}

std::vector<IterationError> read_curve_csv(std::istream& in) {
  std::vector<IterationError> c;
  for (const auto& r : detail::read_numeric_csv(in, kCurveHeader, "error curve"))
    c.push_back({r[1], r[2], r[3]});
  return c;
}

} // namespace cann::scaling
