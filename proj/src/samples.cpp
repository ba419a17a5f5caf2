#include "cann/samples.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace cann {

SampleSet augment_frame_invariance(const SampleSet& in, double shear_sign) {
  SampleSet out = in;
  out.records.reserve(2 * in.records.size());
  for (const auto& r : in.records) {
    Sample s = r;
    std::swap(s.stress.c[0], s.stress.c[1]);
    std::swap(s.strain.c[0], s.strain.c[1]);
    s.stress.c[2] *= shear_sign;
    s.strain.c[2] *= shear_sign;
    s.augmented = true;
    out.records.push_back(s);
  }
  return out;
}

std::vector<SampleGroup> group_by_coord(const SampleSet& s) {
  std::vector<SampleGroup> groups;
  std::map<std::pair<double, double>, std::size_t> where;
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    const auto& c = s.records[i].coord;
    auto [it, fresh] = where.try_emplace({c.x, c.y}, groups.size());
    if (fresh)
      groups.push_back({c, {}});
    groups[it->second].indices.push_back(i);
  }
  return groups;
}

namespace {
constexpr const char* kHeader = "x_mm,y_mm,step,s11,s22,s12,e11,e22,e12,aug";
}

void write_csv(std::ostream& out, const SampleSet& s) {
  out << "# stress_unit_pa: " << fmt_double(s.stress_unit_pa) << '\n' << kHeader << '\n';
  for (const auto& r : s.records) {
    out << fmt_double(r.coord.x) << ',' << fmt_double(r.coord.y) << ',' << r.step;
    for (double v : r.stress.c)
      out << ',' << fmt_double(v);
    for (double v : r.strain.c)
      out << ',' << fmt_double(v);
    out << ',' << (r.augmented ? 1 : 0) << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const SampleSet& s) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write dataset " + path.string());
  write_csv(out, s);
}

SampleSet read_csv(std::istream& in, double expected_unit_pa) {
  SampleSet s;
  bool have_unit = false, have_header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const char* key = "# stress_unit_pa:";
      if (line.rfind(key, 0) == 0) {
        std::string v = line.substr(std::strlen(key));
        v.erase(0, v.find_first_not_of(' '));
        if (!parse_double(v, s.stress_unit_pa) || !(s.stress_unit_pa > 0.0))
          throw ConfigError("dataset: bad stress_unit_pa '" + v + "'");
        have_unit = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != kHeader)
        throw ConfigError(std::string("dataset: expected header '") + kHeader + "'");
      have_header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string t; std::getline(ls, t, ',');)
      f.push_back(t);
    if (f.size() != 10)
      throw ConfigError("dataset line " + std::to_string(lineno) + ": expected 10 fields");
    Sample r;
    double v[9];
    for (int i = 0; i < 9; ++i)
      if (!parse_double(f[i], v[i]) || !std::isfinite(v[i]))
        throw ConfigError("dataset line " + std::to_string(lineno) + ": bad number '" + f[i] + "'");
    r.coord = {v[0], v[1]};
    r.step = static_cast<int>(v[2]);
    r.stress.c = {v[3], v[4], v[5]};
    r.strain.c = {v[6], v[7], v[8]};
    if (f[9] != "0" && f[9] != "1")
      throw ConfigError("dataset line " + std::to_string(lineno) + ": aug must be 0 or 1");
    r.augmented = f[9] == "1";
    s.records.push_back(r);
  }
  if (!have_header)
    throw ConfigError("dataset has no header");
  if (!have_unit)
    throw ConfigError("dataset has no stress_unit_pa line");
  if (expected_unit_pa > 0.0 && s.stress_unit_pa != expected_unit_pa)
    throw ConfigError("dataset stress unit " + fmt_double(s.stress_unit_pa) +
                      " Pa does not match the expected " + fmt_double(expected_unit_pa) + " Pa");
  return s;
}

SampleSet read_csv(const std::filesystem::path& path, double expected_unit_pa) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open dataset " + path.string());
  return read_csv(in, expected_unit_pa);
}

} // namespace cann
