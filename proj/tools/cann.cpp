#include "cann/error.hpp"
#include "cann/fesolve.hpp"
#include "cann/pipeline.hpp"
#include "cann/recon.hpp"
#include "cann/scaling.hpp"
#include "cann/sn.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

using namespace cann;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  std::string config;
};

fs::path out_path(const Globals& g, const std::string& file) {
  fs::path p(file);
  if (p.is_relative())
    p = fs::path(g.out_dir) / p;
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  return p;
}

phantom::ModulusField load_phantom(const std::string& name) {
  return phantom::load_config(pipeline::resolve_data_path(name, fs::current_path()));
}

femesh::QuadMesh load_mesh(const std::string& name) {
  return femesh::load(pipeline::resolve_data_path(name, fs::current_path()));
}

void print_score(const recon::Score& s) { std::printf("mean %.6f std %.6f\n", s.mean, s.std); }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cartesian neural network constitutive models for elasticity imaging"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Override every seed of the command");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs with relative names")->capture_default_str();
  app.add_option("--config", g.config, "Experiment config (JSON) for 'run'");

  // phantom
  auto* ph = app.add_subcommand("phantom", "Render a phantom's modulus map");
  std::string ph_file, ph_out = "target";
  std::size_t ph_grid = 101;
  ph->add_option("--phantom", ph_file, "Phantom description (JSON)")->required();
  ph->add_option("--grid", ph_grid, "Lattice size")->capture_default_str();
  ph->add_option("--out", ph_out, "Output stem")->capture_default_str();

  // mesh
  auto* me = app.add_subcommand("mesh", "Build or check a mesh");
  std::string me_kind = "rectilinear", me_out = "mesh.txt", me_check;
  int me_nodes = 35;
  me->add_option("--kind", me_kind, "rectilinear or three_inclusion")->capture_default_str();
  me->add_option("--nodes", me_nodes, "Nodes per edge (rectilinear)")->capture_default_str();
  me->add_option("--out", me_out, "Output file")->capture_default_str();
  me->add_option("--check", me_check, "Validate an existing mesh file instead");

  // fea
  auto* fe = app.add_subcommand("fea", "Generate a stress/strain dataset");
  std::string fe_phantom, fe_mesh, fe_out = "data.csv";
  double fe_noise = 0.0;
  fesolve::LoadProgram fe_load;
  fe->add_option("--phantom", fe_phantom, "Phantom description (JSON)")->required();
  fe->add_option("--mesh", fe_mesh, "Mesh file (default: 35 x 35 rectilinear)");
  fe->add_option("--noise", fe_noise, "Relative modulus noise magnitude")->capture_default_str();
  fe->add_option("--force", fe_load.total_force_n, "Total probe force, N")->capture_default_str();
  fe->add_option("--steps", fe_load.n_steps, "Load steps")->capture_default_str();
  fe->add_option("--probe-width", fe_load.probe_width_mm, "Probe width, mm")->capture_default_str();
  fe->add_option("--out", fe_out, "Dataset CSV")->capture_default_str();

  // mpn
  auto* mp = app.add_subcommand("mpn", "Pretrain the material property network");
  std::string mp_out = "mpn.net";
  mpn::PretrainConfig mp_cfg;
  mp->add_option("--epochs", mp_cfg.train.epochs, "RPROP epochs")->capture_default_str();
  mp->add_option("--e-ref", mp_cfg.e_ref_pa, "Reference modulus, Pa")->capture_default_str();
  mp->add_option("--stress-unit", mp_cfg.stress_unit_pa, "Pa per internal stress unit")->capture_default_str();
  mp->add_option("--out", mp_out, "Network file")->capture_default_str();

  // scale
  auto* sc = app.add_subcommand("scale", "Compute the spatial scaling field");
  auto* sc_compute = sc->add_subcommand("compute", "Run the per-point gradient iteration");
  sc->require_subcommand(1);
  std::string sc_mpn, sc_data, sc_out = "field.csv", sc_curve = "curve.csv";
  scaling::GdConfig gd;
  bool sc_no_aug = false;
  sc_compute->add_option("--mpn", sc_mpn, "Material network file")->required();
  sc_compute->add_option("--data", sc_data, "Dataset CSV")->required();
  sc_compute->add_option("--iters", gd.iterations, "Iterations")->capture_default_str();
  sc_compute->add_option("--eta", gd.eta, "Step size")->capture_default_str();
  sc_compute->add_option("--eta-unit", gd.eta_stress_unit_pa, "Stress unit of the update, Pa")
      ->capture_default_str();
  sc_compute->add_flag("--exact", gd.use_exact_gradient, "Use the Jacobian inner sum");
  sc_compute->add_flag("--no-augment", sc_no_aug, "Do not append swapped copies of the data");
  sc_compute->add_option("--out", sc_out, "Field CSV")->capture_default_str();
  sc_compute->add_option("--curve", sc_curve, "Error curve CSV")->capture_default_str();

  // sn
  auto* sp = app.add_subcommand("sn", "Spatial network");
  auto* sp_fit = sp->add_subcommand("fit", "Fit the spatial network to a scaling field");
  sp->require_subcommand(1);
  std::string sp_field, sp_mesh, sp_preset = "test1", sp_out = "sn.net";
  sp_fit->add_option("--field", sp_field, "Field CSV")->required();
  sp_fit->add_option("--mesh", sp_mesh, "Mesh file")->required();
  sp_fit->add_option("--preset", sp_preset, "test1 or test2")->capture_default_str();
  sp_fit->add_option("--out", sp_out, "Network file")->capture_default_str();

  // recon
  auto* rc = app.add_subcommand("recon", "Reconstruct and score modulus images");
  rc->require_subcommand(1);
  auto* rc_run = rc->add_subcommand("run", "Reconstruct an image from mpn.net + sn.net");
  std::string rc_cann, rc_out = "modulus";
  std::size_t rc_grid = 101;
  rc_run->add_option("--cann", rc_cann, "Directory with mpn.net and sn.net")->required();
  rc_run->add_option("--grid", rc_grid, "Lattice size")->capture_default_str();
  rc_run->add_option("--out", rc_out, "Output stem or .csv file")->capture_default_str();
  auto* rc_score = rc->add_subcommand("score", "Relative error of an image against a phantom");
  std::string rs_image, rs_phantom;
  rc_score->add_option("--image", rs_image, "Image CSV")->required();
  rc_score->add_option("--phantom", rs_phantom, "Phantom description (JSON)")->required();

  // run
  auto* rn = app.add_subcommand("run", "Run an experiment end to end");
  std::string rn_preset;
  bool rn_list = false, rn_all = false;
  rn->add_option("--preset", rn_preset, "Preset name");
  rn->add_flag("--list", rn_list, "List presets");
  rn->add_flag("--all", rn_all, "Run every preset");

  // report
  auto* rp = app.add_subcommand("report", "Summarise the runs under --out-dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ph->parsed()) {
      const auto f = load_phantom(ph_file);
      recon::ModulusImage img;
      img.grid = Grid(ph_grid, ph_grid);
      img.extent = {{0, 0}, {f.width_mm(), f.height_mm()}};
      img.probe_strain = recon::default_probe_strain();
      for (std::size_t r = 0; r < ph_grid; ++r)
        for (std::size_t c = 0; c < ph_grid; ++c)
          img.grid.at(r, c) = f.eval(img.point(r, c));
      const auto w = recon::render(img, out_path(g, ph_out));
      std::printf("%s: %.0f .. %.0f Pa\n", std::string(phantom::to_string(f.tag())).c_str(), w.lo, w.hi);
    } else if (me->parsed()) {
      if (!me_check.empty()) {
        const auto m = load_mesh(me_check);
        femesh::validate(m);
        std::printf("%zu nodes, %zu elements\n", m.nodes.size(), m.elements.size());
      } else {
        femesh::QuadMesh m;
        if (me_kind == "rectilinear")
          m = femesh::make_rectilinear(50, 50, me_nodes);
        else if (me_kind == "three_inclusion")
          m = femesh::make_disc_conforming(femesh::three_inclusion_layout());
        else
          throw ConfigError("unknown mesh kind '" + me_kind + "'");
        femesh::save(out_path(g, me_out), m);
        std::printf("%zu nodes, %zu elements\n", m.nodes.size(), m.elements.size());
      }
    } else if (fe->parsed()) {
      const auto f = load_phantom(fe_phantom);
      auto mesh = fe_mesh.empty() ? femesh::make_rectilinear(50, 50, 35) : load_mesh(fe_mesh);
      phantom::NoiseSpec noise{fe_noise, g.seed.value_or(0), 1};
      auto d = fesolve::dual_fea_noise_dataset(f, noise, mesh, fe_load);
      write_csv(out_path(g, fe_out), d);
      std::printf("%zu records\n", d.size());
    } else if (mp->parsed()) {
      if (g.seed)
        mp_cfg.seed = *g.seed;
      auto r = mpn::pretrain(mp_cfg);
      mpn::write(out_path(g, mp_out), r.mpn);
      std::printf("%zu pairs, final loss %.3g, relative error %.4f%s\n", r.n_pairs, r.loss_trace.back(),
                  mpn::fidelity_error(r.mpn, mp_cfg.e_ref_pa, mp_cfg.poisson, 1000, 0.1, 7),
                  r.stress_scale_raised ? " (stress scale raised)" : "");
    } else if (sc_compute->parsed()) {
      const auto net = mpn::read(fs::path(sc_mpn));
      auto data = read_csv(fs::path(sc_data), net.stress_unit_pa);
      if (!sc_no_aug)
        data = augment_frame_invariance(data);
      const auto f = scaling::compute_field(net, data, gd);
      scaling::write_field_csv(out_path(g, sc_out), f);
      scaling::write_curve_csv(out_path(g, sc_curve), f);
      std::printf("%zu points, mean RMS %.4g -> %.4g Pa\n", f.size(), f.curve.front().mean, f.curve.back().mean);
    } else if (sp_fit->parsed()) {
      sn::SnTrainSpec spec;
      if (sp_preset == "test1")
        spec = sn::SnTrainSpec::test1();
      else if (sp_preset == "test2")
        spec = sn::SnTrainSpec::test2();
      else
        throw ConfigError("unknown SN preset '" + sp_preset + "'");
      if (g.seed)
        spec.seed = *g.seed;
      const auto r = sn::fit(scaling::read_field_csv(fs::path(sp_field)), load_mesh(sp_mesh), spec);
      sn::write(out_path(g, sp_out), r.sn);
      std::printf("final loss %.4g\n", r.loss_trace.back());
    } else if (rc_run->parsed()) {
      const auto c = recon::load(rc_cann);
      const auto img = recon::reconstruct(c, rc_grid, rc_grid);
      fs::path stem = out_path(g, rc_out);
      if (stem.extension() == ".csv")
        stem.replace_extension();
      const auto w = recon::render(img, stem);
      std::printf("%.0f .. %.0f Pa%s\n", w.lo, w.hi,
                  img.nonpositive ? (", " + std::to_string(img.nonpositive) + " non-positive").c_str() : "");
    } else if (rc_score->parsed()) {
      print_score(recon::score(recon::read_image_csv(fs::path(rs_image)), load_phantom(rs_phantom)));
    } else if (rn->parsed()) {
      if (rn_list) {
        for (const auto& p : pipeline::list_presets())
          std::printf("%s\n", p.c_str());
        return 0;
      }
      std::vector<pipeline::ExperimentConfig> runs;
      if (!g.config.empty())
        runs.push_back(pipeline::load_config(g.config));
      else if (rn_all)
        for (const auto& p : pipeline::list_presets())
          runs.push_back(pipeline::preset(p));
      else if (!rn_preset.empty())
        runs.push_back(pipeline::preset(rn_preset));
      else
        throw ConfigError("run needs --preset, --all or --config");
      for (auto& c : runs) {
        if (g.seed) {
          c.noise.rng_seed = *g.seed;
          c.mpn.seed = *g.seed;
          c.sn.seed = *g.seed;
        }
        const auto r = pipeline::run_experiment(c, fs::path(g.out_dir) / c.name);
        double total = 0;
        for (const auto& s : r.timings)
          total += s.seconds;
        std::printf("%-24s mean %.4f std %.4f  (%.1f s)\n", c.name.c_str(), r.score.mean, r.score.std, total);
        std::fflush(stdout);
      }
    } else if (rp->parsed()) {
      std::cout << pipeline::summarize(g.out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
