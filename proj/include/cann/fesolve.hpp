#pragma once

#include "cann/femesh.hpp"
#include "cann/phantom.hpp"
#include "cann/samples.hpp"

#include <cstddef>
#include <vector>

namespace cann::fesolve {

struct LoadProgram {
  double total_force_n = 0.01357;
  int n_steps = 4;
  double probe_width_mm = 20.0;
  void validate() const;
};

enum class Support {
  // Bottom nodes fixed in x and y; force split over the probe contact nodes.
  pinned_probe,
  // Bottom nodes fixed in y, one bottom node also in x; force spread over the
  // whole top edge as a uniform pressure (consistent nodal loads).
  roller_pressure,
};

struct SolveOptions {
  double poisson = 0.5;
  double thickness_mm = 1.0;
  Support support = Support::pinned_probe;
  bool iterative_only = false;
  double cg_tolerance = 1e-10;
};

struct StepResult {
  double force_n = 0.0;
  std::vector<double> u; // (ux, uy) per node, mm
  std::vector<double> reaction; // N, nonzero only on constrained DOFs
};

struct Solution {
  std::vector<StepResult> steps;
  std::vector<std::size_t> loaded_nodes;
  // Mean downward displacement of the loaded nodes, mm.
  double probe_displacement(std::size_t step) const;
};

// Copies the field into mesh.element_modulus, one value per element centroid.
void assign_modulus(femesh::QuadMesh& mesh, const phantom::ModulusField& field);

std::vector<std::size_t> contact_nodes(const femesh::QuadMesh& mesh, double probe_width_mm);

// Needs mesh.element_modulus. Throws NumericError if the system is singular or
// the iterative fallback does not reach its tolerance.
Solution assemble_and_solve(const femesh::QuadMesh& mesh, const LoadProgram& load,
                            const SolveOptions& opt = {});

// Per element and step: Gauss-point mean strain, stress = C(E_e, nu) strain,
// coordinate = element centroid. Steps outer, elements inner.
SampleSet extract_samples(const femesh::QuadMesh& mesh, const Solution& sol, double poisson = 0.5);

// Strain of one element from a nodal displacement vector.
StrainVector element_strain(const femesh::QuadMesh& mesh, std::size_t e, const std::vector<double>& u);

// Two independently corrupted copies of the field (draw ids 1 and 2); stresses
// from the first analysis, strains from the second.
SampleSet dual_fea_noise_dataset(const phantom::ModulusField& field, const phantom::NoiseSpec& noise,
                                 femesh::QuadMesh mesh, const LoadProgram& load,
                                 const SolveOptions& opt = {});

} // namespace cann::fesolve
