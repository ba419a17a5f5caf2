#include "cann/pipeline.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace cann::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (name.empty())
    throw ConfigError("experiment name must not be empty");
  if (mesh.kind == MeshKind::rectilinear && mesh.nodes_per_edge < 2)
    throw ConfigError("rectilinear mesh needs at least 2 nodes per edge");
  if (mesh.kind == MeshKind::file && mesh.path.empty())
    throw ConfigError("mesh file path missing");
  load.validate();
  noise.validate();
  mpn.validate();
  gd.validate();
  sn.validate();
  if (recon_rows < 2 || recon_cols < 2)
    throw ConfigError("reconstruction grid needs at least 2 x 2 points");
  recon::check_probe_strain(probe_strain);
}

namespace {

std::string_view mesh_kind_name(MeshKind k) {
  switch (k) {
  case MeshKind::rectilinear:
    return "rectilinear";
  case MeshKind::three_inclusion:
    return "three_inclusion";
  case MeshKind::file:
    return "file";
  }
  return "?";
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object())
    throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k))
      throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key))
    out = j.at(key).get<T>();
}

} // namespace

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["phantom"] = c.phantom;
  ordered_json m;
  m["kind"] = mesh_kind_name(c.mesh.kind);
  if (c.mesh.kind == MeshKind::rectilinear)
    m["nodes_per_edge"] = c.mesh.nodes_per_edge;
  if (c.mesh.kind == MeshKind::file)
    m["path"] = c.mesh.path;
  j["mesh"] = m;
  j["load"] = {{"total_force_n", c.load.total_force_n},
               {"n_steps", c.load.n_steps},
               {"probe_width_mm", c.load.probe_width_mm}};
  j["noise"] = {{"relative_magnitude", c.noise.relative_magnitude}, {"seed", c.noise.rng_seed}};
  j["augment"] = c.augment;
  j["mpn"] = {{"e_ref_pa", c.mpn.e_ref_pa},
              {"poisson", c.mpn.poisson},
              {"n_samples", c.mpn.n_samples},
              {"strain_range", c.mpn.strain_range},
              {"stress_unit_pa", c.mpn.stress_unit_pa},
              {"stress_scale", c.mpn.stress_scale},
              {"auto_stress_scale", c.mpn.auto_stress_scale},
              {"init_range", c.mpn.init_range},
              {"shear_sign", c.mpn.shear_sign},
              {"epochs", c.mpn.train.epochs},
              {"seed", c.mpn.seed}};
  j["scaling"] = {{"iterations", c.gd.iterations},
                  {"eta", c.gd.eta},
                  {"s_floor", c.gd.s_floor},
                  {"exact_gradient", c.gd.use_exact_gradient},
                  {"eta_stress_unit_pa", c.gd.eta_stress_unit_pa},
                  {"stress_unit", c.gd.stress_unit == scaling::UpdateUnit::fixed ? "fixed" : "point_rms"}};
  j["sn"] = {{"iterations", c.sn.iterations}, {"epochs", c.sn.epochs},     {"learning_rate", c.sn.learning_rate},
             {"target_lo", c.sn.target_lo},   {"target_hi", c.sn.target_hi}, {"seed", c.sn.seed}};
  j["recon"] = {{"rows", c.recon_rows},
                {"cols", c.recon_cols},
                {"probe_strain", {c.probe_strain[0], c.probe_strain[1], c.probe_strain[2]}}};
  j["mpn_cache_dir"] = c.mpn_cache_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    check_keys(j, {"name", "phantom", "mesh", "load", "noise", "augment", "mpn", "scaling", "sn", "recon",
                   "mpn_cache_dir"},
               "experiment config");
    get(j, "name", c.name);
    if (j.contains("phantom"))
      c.phantom = j["phantom"];
    if (j.contains("mesh")) {
      const auto& m = j["mesh"];
      check_keys(m, {"kind", "nodes_per_edge", "path"}, "mesh");
      const std::string kind = m.value("kind", "rectilinear");
      if (kind == "rectilinear")
        c.mesh.kind = MeshKind::rectilinear;
      else if (kind == "three_inclusion")
        c.mesh.kind = MeshKind::three_inclusion;
      else if (kind == "file")
        c.mesh.kind = MeshKind::file;
      else
        throw ConfigError("unknown mesh kind '" + kind + "'");
      get(m, "nodes_per_edge", c.mesh.nodes_per_edge);
      get(m, "path", c.mesh.path);
    }
    if (j.contains("load")) {
      const auto& l = j["load"];
      check_keys(l, {"total_force_n", "n_steps", "probe_width_mm"}, "load");
      get(l, "total_force_n", c.load.total_force_n);
      get(l, "n_steps", c.load.n_steps);
      get(l, "probe_width_mm", c.load.probe_width_mm);
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      check_keys(n, {"relative_magnitude", "seed"}, "noise");
      get(n, "relative_magnitude", c.noise.relative_magnitude);
      get(n, "seed", c.noise.rng_seed);
    }
    get(j, "augment", c.augment);
    if (j.contains("mpn")) {
      const auto& m = j["mpn"];
      check_keys(m, {"e_ref_pa", "poisson", "n_samples", "strain_range", "stress_unit_pa", "stress_scale",
                     "auto_stress_scale", "init_range", "shear_sign", "epochs", "seed"},
                 "mpn");
      get(m, "e_ref_pa", c.mpn.e_ref_pa);
      get(m, "poisson", c.mpn.poisson);
      get(m, "n_samples", c.mpn.n_samples);
      get(m, "strain_range", c.mpn.strain_range);
      get(m, "stress_unit_pa", c.mpn.stress_unit_pa);
      get(m, "stress_scale", c.mpn.stress_scale);
      get(m, "auto_stress_scale", c.mpn.auto_stress_scale);
      get(m, "init_range", c.mpn.init_range);
      get(m, "shear_sign", c.mpn.shear_sign);
      get(m, "epochs", c.mpn.train.epochs);
      get(m, "seed", c.mpn.seed);
    }
    if (j.contains("scaling")) {
      const auto& s = j["scaling"];
      check_keys(s, {"iterations", "eta", "s_floor", "exact_gradient", "eta_stress_unit_pa", "stress_unit"},
                 "scaling");
      get(s, "iterations", c.gd.iterations);
      get(s, "eta", c.gd.eta);
      get(s, "s_floor", c.gd.s_floor);
      get(s, "exact_gradient", c.gd.use_exact_gradient);
      get(s, "eta_stress_unit_pa", c.gd.eta_stress_unit_pa);
      const std::string unit = s.value("stress_unit", "fixed");
      if (unit == "fixed")
        c.gd.stress_unit = scaling::UpdateUnit::fixed;
      else if (unit == "point_rms")
        c.gd.stress_unit = scaling::UpdateUnit::point_rms;
      else
        throw ConfigError("unknown scaling stress_unit '" + unit + "'");
    }
    if (j.contains("sn")) {
      const auto& s = j["sn"];
      check_keys(s, {"iterations", "epochs", "learning_rate", "target_lo", "target_hi", "seed"}, "sn");
      get(s, "iterations", c.sn.iterations);
      get(s, "epochs", c.sn.epochs);
      get(s, "learning_rate", c.sn.learning_rate);
      get(s, "target_lo", c.sn.target_lo);
      get(s, "target_hi", c.sn.target_hi);
      get(s, "seed", c.sn.seed);
    }
    if (j.contains("recon")) {
      const auto& r = j["recon"];
      check_keys(r, {"rows", "cols", "probe_strain"}, "recon");
      get(r, "rows", c.recon_rows);
      get(r, "cols", c.recon_cols);
      if (r.contains("probe_strain")) {
        const auto v = r["probe_strain"].get<std::vector<double>>();
        if (v.size() != 3)
          throw ConfigError("probe_strain needs 3 components");
        c.probe_strain = {{v[0], v[1], v[2]}};
      }
    }
    get(j, "mpn_cache_dir", c.mpn_cache_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::vector<std::string> list_presets() {
  return {"model1_test1",         "model1_test2",         "model2_test1",         "model2_test2",
          "model2_mesh2_test1",   "model3_test1",         "model3_test2",         "model3_noise10_test1",
          "model3_noise10_test2", "model3_noise30_test1", "model3_noise30_test2", "model4_test1",
          "model4_test2"};
}

ExperimentConfig preset(const std::string& name) {
  const auto all = list_presets();
  if (std::find(all.begin(), all.end(), name) == all.end())
    throw ConfigError("unknown preset '" + name + "'");
  ExperimentConfig c;
  c.name = name;
  c.phantom = {{"file", name.substr(0, 6) + ".json"}};
  if (name.find("mesh2") != std::string::npos)
    c.mesh.kind = MeshKind::three_inclusion;
  if (name.find("noise10") != std::string::npos)
    c.noise.relative_magnitude = 0.10;
  if (name.find("noise30") != std::string::npos)
    c.noise.relative_magnitude = 0.30;
  c.noise.rng_seed = 2024;
  c.sn = name.ends_with("test2") ? sn::SnTrainSpec::test2() : sn::SnTrainSpec::test1();
  return c;
}

std::filesystem::path resolve_data_path(const std::string& name, const std::filesystem::path& base_dir) {
  const std::filesystem::path p(name);
  if (p.is_absolute())
    return p;
  const std::filesystem::path data(CANN_DATA_DIR);
  for (const auto& dir : {base_dir, data, data / "phantoms"}) {
    if (dir.empty())
      continue;
    if (std::filesystem::exists(dir / p))
      return dir / p;
  }
  if (std::filesystem::exists(p))
    return p;
  throw ConfigError("cannot find '" + name + "'");
}

phantom::ModulusField build_phantom(const ExperimentConfig& c) {
  if (c.phantom.contains("file")) {
    if (c.phantom.size() != 1)
      throw ConfigError("phantom: 'file' cannot be combined with other keys");
    return phantom::load_config(resolve_data_path(c.phantom["file"].get<std::string>(), c.base_dir));
  }
  return phantom::from_json(c.phantom, c.base_dir);
}

femesh::QuadMesh build_mesh(const ExperimentConfig& c) {
  switch (c.mesh.kind) {
  case MeshKind::rectilinear:
    return femesh::make_rectilinear(50, 50, c.mesh.nodes_per_edge);
  case MeshKind::three_inclusion:
    return femesh::make_disc_conforming(femesh::three_inclusion_layout());
  case MeshKind::file:
    return femesh::load(resolve_data_path(c.mesh.path, c.base_dir));
  }
  throw ConfigError("bad mesh kind");
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class F>
auto timed_stage(const char* name, std::vector<StageTime>& times, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto done = [&] {
    times.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    auto r = f();
    done();
    return r;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("stage ") + name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& p, const ordered_json& j) {
  std::ofstream out(p);
  if (!out)
    throw ConfigError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

} // namespace

mpn::MaterialPropertyNet cached_mpn(const mpn::PretrainConfig& cfg, const std::filesystem::path& cache_dir,
                                    bool* from_cache) {
  ExperimentConfig probe;
  probe.mpn = cfg;
  const std::string key = to_json(probe)["mpn"].dump();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
  const auto path = cache_dir / ("mpn-" + std::string(hex) + ".net");
  const bool hit = std::filesystem::exists(path);
  if (!hit) {
    std::filesystem::create_directories(cache_dir);
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count());
    mpn::write(tmp, mpn::pretrain(cfg).mpn);
    std::filesystem::rename(tmp, path);
  }
  if (from_cache)
    *from_cache = hit;
  return mpn::read(path, cfg.stress_unit_pa);
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  RunResult res;
  res.out_dir = out_dir;
  auto& t = res.timings;
  write_json(out_dir / "config.json", to_json(cfg));

  const auto field = timed_stage("phantom", t, [&] { return build_phantom(cfg); });
  auto mesh = timed_stage("mesh", t, [&] {
    auto m = build_mesh(cfg);
    femesh::save(out_dir / "mesh.txt", m);
    return m;
  });

  const SampleSet data = timed_stage("fea", t, [&] {
    SampleSet d = fesolve::dual_fea_noise_dataset(field, cfg.noise, mesh, cfg.load);
    d.stress_unit_pa = cfg.mpn.stress_unit_pa;
    write_csv(out_dir / "data.csv", d);
    return d;
  });
  res.n_records = data.size();

  const auto net = timed_stage("mpn", t, [&] {
    const std::filesystem::path cache = cfg.mpn_cache_dir.empty()
                                            ? std::filesystem::absolute(out_dir).parent_path() / "mpn_cache"
                                            : std::filesystem::path(cfg.mpn_cache_dir);
    auto m = cached_mpn(cfg.mpn, cache, &res.mpn_from_cache);
    mpn::write(out_dir / "mpn.net", m);
    return m;
  });

  res.field = timed_stage("scale", t, [&] {
    const SampleSet used = cfg.augment ? augment_frame_invariance(data) : data;
    auto f = scaling::compute_field(net, used, cfg.gd);
    scaling::write_field_csv(out_dir / "field.csv", f);
    scaling::write_curve_csv(out_dir / "curve.csv", f);
    return f;
  });
  res.n_points = res.field.size();

  const auto spatial = timed_stage("sn", t, [&] {
    auto r = sn::fit(res.field, mesh, cfg.sn);
    sn::write(out_dir / "sn.net", r.sn);
    std::ofstream lt(out_dir / "sn_loss.csv");
    lt << "epoch,loss\n";
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i)
      lt << i + 1 << ',' << fmt_double(r.loss_trace[i]) << '\n';
    return r.sn;
  });

  res.image = timed_stage("recon", t, [&] {
    recon::Cann c{net, spatial, net.stress_unit_pa};
    auto img = recon::reconstruct(c, cfg.recon_rows, cfg.recon_cols, cfg.probe_strain);
    recon::ModulusImage target = img;
    for (std::size_t r = 0; r < img.grid.rows; ++r)
      for (std::size_t q = 0; q < img.grid.cols; ++q)
        target.grid.at(r, q) = field.eval(img.point(r, q));
    const auto [lo, hi] = std::minmax_element(target.grid.values.begin(), target.grid.values.end());
    recon::Window w{*lo, *hi};
    if (!(w.lo < w.hi))
      w = {0.5 * *lo, 1.5 * *hi};
    recon::render(img, out_dir / "modulus", w);
    recon::render(target, out_dir / "target", w);
    return img;
  });

  res.score = timed_stage("score", t, [&] {
    auto s = recon::score(res.image, field);
    write_pgm(out_dir / "error.pgm", s.error_map, 0.0, 0.2);
    return s;
  });

  double s2lo = res.field.scales.front()[1], s2hi = s2lo;
  for (const auto& s : res.field.scales) {
    s2lo = std::min(s2lo, s[1]);
    s2hi = std::max(s2hi, s[1]);
  }
  ordered_json score;
  score["name"] = cfg.name;
  score["phantom_model"] = phantom::to_string(field.tag());
  score["mean_error"] = res.score.mean;
  score["std_error"] = res.score.std;
  score["n_records"] = res.n_records;
  score["n_points"] = res.n_points;
  score["stress_unit_pa"] = net.stress_unit_pa;
  score["stress_scale"] = net.stress_scale;
  score["seeds"] = {{"noise", cfg.noise.rng_seed}, {"mpn", cfg.mpn.seed}, {"sn", cfg.sn.seed}};
  score["s2_min"] = s2lo;
  score["s2_max"] = s2hi;
  const auto& curve = res.field.curve;
  score["rms_mean_first"] = curve.front().mean;
  score["rms_mean_iter50"] = curve[std::min<std::size_t>(50, curve.size() - 1)].mean;
  score["rms_mean_last"] = curve.back().mean;
  score["nonpositive_pixels"] = res.image.nonpositive;
  write_json(out_dir / "score.json", score);

  ordered_json report = score;
  ordered_json times = ordered_json::object();
  double total = 0.0;
  for (const auto& s : t) {
    times[s.stage] = s.seconds;
    total += s.seconds;
  }
  times["total"] = total;
  report["timings_s"] = times;
  report["mpn_from_cache"] = res.mpn_from_cache;
  write_json(out_dir / "report.json", report);

  std::ofstream txt(out_dir / "summary.txt");
  txt << cfg.name << "\n  modulus error  " << fmt_double(res.score.mean) << " +- " << fmt_double(res.score.std)
      << "\n  records " << res.n_records << ", points " << res.n_points << "\n  S2 range [" << fmt_double(s2lo)
      << ", " << fmt_double(s2hi) << "]\n  mean RMS stress error " << fmt_double(curve.front().mean) << " -> "
      << fmt_double(curve.back().mean) << " Pa\n";
  for (const auto& s : t)
    txt << "  " << s.stage << ' ' << fmt_double(s.seconds) << " s\n";
  return res;
}

std::string summarize(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::is_directory(root))
    for (const auto& e : std::filesystem::directory_iterator(root))
      if (e.is_directory() && std::filesystem::exists(e.path() / "report.json"))
        dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %10s %10s %10s\n", "run", "mean", "std", "time_s");
  os << line;
  for (const auto& d : dirs) {
    std::ifstream in(d / "report.json");
    json j;
    try {
      j = json::parse(in);
      std::snprintf(line, sizeof line, "%-24s %10.4f %10.4f %10.1f\n", j.at("name").get<std::string>().c_str(),
                    j.at("mean_error").get<double>(), j.at("std_error").get<double>(),
                    j.at("timings_s").at("total").get<double>());
    } catch (const json::exception& e) {
      throw ConfigError((d / "report.json").string() + ": " + e.what());
    }
    os << line;
  }
  return os.str();
}

} // namespace cann::pipeline
