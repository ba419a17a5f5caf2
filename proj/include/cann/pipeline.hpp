#pragma once

#include "cann/fesolve.hpp"
#include "cann/mpn.hpp"
#include "cann/phantom.hpp"
#include "cann/recon.hpp"
#include "cann/scaling.hpp"
#include "cann/sn.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cann::pipeline {

enum class MeshKind { rectilinear, three_inclusion, file };

struct MeshSpec {
  MeshKind kind = MeshKind::rectilinear;
  int nodes_per_edge = 35;
  std::string path; // for MeshKind::file
};

struct ExperimentConfig {
  std::string name = "experiment";
  // Either {"file": "model1.json"} or an inline phantom description.
  nlohmann::json phantom = {{"file", "model1.json"}};
  MeshSpec mesh;
  fesolve::LoadProgram load;
  phantom::NoiseSpec noise;
  bool augment = true;
  mpn::PretrainConfig mpn;
  scaling::GdConfig gd;
  sn::SnTrainSpec sn;
  std::size_t recon_rows = 101;
  std::size_t recon_cols = 101;
  StrainVector probe_strain = recon::default_probe_strain();
  // Where pretrained networks are cached; empty means <out_dir>/../mpn_cache.
  std::string mpn_cache_dir;
  // Relative paths in the config resolve against this directory first.
  std::filesystem::path base_dir;

  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> list_presets();
ExperimentConfig preset(const std::string& name);

// Relative names are looked up in base_dir, the shipped data directory and its
// phantoms/ subdirectory, in that order.
std::filesystem::path resolve_data_path(const std::string& name, const std::filesystem::path& base_dir);

phantom::ModulusField build_phantom(const ExperimentConfig& c);
femesh::QuadMesh build_mesh(const ExperimentConfig& c);

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct RunResult {
  std::filesystem::path out_dir;
  std::size_t n_records = 0; // before augmentation
  std::size_t n_points = 0;
  bool mpn_from_cache = false;
  scaling::ScalingField field;
  recon::ModulusImage image;
  recon::Score score;
  std::vector<StageTime> timings;
};

// phantom -> FEA -> pretrain (or cached MPN) -> scaling field -> SN -> image -> score.
// Every stage writes its artifacts into out_dir; a failing stage is named in the
// exception message and earlier artifacts stay on disk.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Loads the cached network for cfg.mpn, pretraining and storing it if absent.
mpn::MaterialPropertyNet cached_mpn(const mpn::PretrainConfig& cfg, const std::filesystem::path& cache_dir,
                                    bool* from_cache = nullptr);

// Summary lines for the run directories under root (one per report.json).
std::string summarize(const std::filesystem::path& root);

} // namespace cann::pipeline
