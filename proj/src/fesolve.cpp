#include "cann/fesolve.hpp"

#include "cann/error.hpp"
#include "q4.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cann::fesolve {

using femesh::QuadMesh;
using SpMat = Eigen::SparseMatrix<double>;

void LoadProgram::validate() const {
  if (n_steps < 1)
    throw ConfigError("load program needs at least one step");
  if (!std::isfinite(total_force_n))
    throw ConfigError("load program force must be finite");
  if (!(probe_width_mm > 0.0))
    throw ConfigError("probe width must be positive");
}

double Solution::probe_displacement(std::size_t step) const {
  const auto& u = steps.at(step).u;
  double s = 0.0;
  for (std::size_t n : loaded_nodes)
    s += -u[2 * n + 1];
  return loaded_nodes.empty() ? 0.0 : s / static_cast<double>(loaded_nodes.size());
}

void assign_modulus(QuadMesh& mesh, const phantom::ModulusField& field) {
  mesh.element_modulus.resize(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const double v = field.eval(mesh.centroid(e));
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("modulus at element " + std::to_string(e) + " is not positive");
    mesh.element_modulus[e] = v;
  }
}

std::vector<std::size_t> contact_nodes(const QuadMesh& mesh, double probe_width_mm) {
  const auto box = mesh.bbox();
  const double xc = box.center().x;
  const double tol = 1e-9 * box.width();
  std::vector<std::size_t> out;
  for (std::size_t n : mesh.top_nodes())
    if (std::abs(mesh.nodes[n].x - xc) <= probe_width_mm / 2.0 + tol)
      out.push_back(n);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::array<Point2, 4> corners(const QuadMesh& m, std::size_t e) {
  const auto& el = m.elements[e];
  return {m.nodes[el[0]], m.nodes[el[1]], m.nodes[el[2]], m.nodes[el[3]]};
}

// 8x8 element stiffness (N/mm) for modulus in N/mm^2.
std::array<double, 64> element_stiffness(const std::array<Point2, 4>& xy, const Mat3& c, double t) {
  std::array<double, 64> ke{};
  for (const auto& gp : q4::gauss_points()) {
    const auto g = q4::shape_gradients(xy, gp[0], gp[1]);
    // B is 3x8; columns (ux_a, uy_a)
    double b[3][8] = {};
    for (int a = 0; a < 4; ++a) {
      b[0][2 * a] = g.dx[a];
      b[1][2 * a + 1] = g.dy[a];
      b[2][2 * a] = g.dy[a];
      b[2][2 * a + 1] = g.dx[a];
    }
    double cb[3][8];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 8; ++j)
        cb[i][j] = c[i][0] * b[0][j] + c[i][1] * b[1][j] + c[i][2] * b[2][j];
    const double w = g.det_j * t;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        ke[i * 8 + j] += w * (b[0][i] * cb[0][j] + b[1][i] * cb[1][j] + b[2][i] * cb[2][j]);
  }
  return ke;
}

SpMat assemble(const QuadMesh& mesh, const SolveOptions& opt) {
  const std::size_t ndof = 2 * mesh.nodes.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.elements.size() * 64);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Mat3 c = plane_stress_matrix(mesh.element_modulus[e] * 1e-6, opt.poisson);
    const auto ke = element_stiffness(corners(mesh, e), c, opt.thickness_mm);
    const auto& el = mesh.elements[e];
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        trip.emplace_back(static_cast<int>(2 * el[i / 2] + i % 2), static_cast<int>(2 * el[j / 2] + j % 2),
                          ke[i * 8 + j]);
  }
  SpMat k(static_cast<Eigen::Index>(ndof), static_cast<Eigen::Index>(ndof));
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

// Unit-total load pattern (N) and the nodes it acts on.
Eigen::VectorXd load_pattern(const QuadMesh& mesh, const LoadProgram& load, Support support,
                             std::vector<std::size_t>& loaded) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * mesh.nodes.size()));
  if (support == Support::pinned_probe) {
    loaded = contact_nodes(mesh, load.probe_width_mm);
    if (loaded.empty())
      throw ConfigError("probe of width " + std::to_string(load.probe_width_mm) + " mm touches no top node");
    for (std::size_t n : loaded)
      f[static_cast<Eigen::Index>(2 * n + 1)] = -1.0 / static_cast<double>(loaded.size());
    return f;
  }
  loaded = mesh.top_nodes();
  std::sort(loaded.begin(), loaded.end(),
            [&](std::size_t a, std::size_t b) { return mesh.nodes[a].x < mesh.nodes[b].x; });
  if (loaded.size() < 2)
    throw ConfigError("pressure loading needs at least two top nodes");
  const double width = mesh.nodes[loaded.back()].x - mesh.nodes[loaded.front()].x;
  for (std::size_t i = 0; i + 1 < loaded.size(); ++i) {
    const double half = 0.5 * (mesh.nodes[loaded[i + 1]].x - mesh.nodes[loaded[i]].x) / width;
    f[static_cast<Eigen::Index>(2 * loaded[i] + 1)] -= half;
    f[static_cast<Eigen::Index>(2 * loaded[i + 1] + 1)] -= half;
  }
  std::sort(loaded.begin(), loaded.end());
  return f;
}

std::vector<bool> constrained_dofs(const QuadMesh& mesh, Support support) {
  std::vector<bool> fixed(2 * mesh.nodes.size(), false);
  const auto& bottom = mesh.bottom_nodes();
  if (bottom.empty())
    throw NumericError("singular system: no bottom nodes to constrain");
  for (std::size_t n : bottom) {
    fixed[2 * n + 1] = true;
    if (support == Support::pinned_probe)
      fixed[2 * n] = true;
  }
  if (support == Support::roller_pressure) {
    const auto anchor = *std::min_element(bottom.begin(), bottom.end(), [&](std::size_t a, std::size_t b) {
      return mesh.nodes[a].x < mesh.nodes[b].x;
    });
    fixed[2 * anchor] = true;
  }
  return fixed;
}

} // namespace

Solution assemble_and_solve(const QuadMesh& mesh, const LoadProgram& load, const SolveOptions& opt) {
  load.validate();
  if (!(opt.poisson >= 0.0 && opt.poisson <= 0.5))
    throw ConfigError("Poisson's ratio must lie in [0, 0.5]");
  if (!(opt.thickness_mm > 0.0))
    throw ConfigError("thickness must be positive");
  if (mesh.element_modulus.size() != mesh.elements.size())
    throw ConfigError("mesh has no per-element modulus assigned");

  const SpMat k = assemble(mesh, opt);
  const auto fixed = constrained_dofs(mesh, opt.support);
  const std::size_t ndof = fixed.size();
  std::vector<Eigen::Index> free_id(ndof, -1);
  Eigen::Index nfree = 0;
  for (std::size_t d = 0; d < ndof; ++d)
    if (!fixed[d])
      free_id[d] = nfree++;

  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < k.outerSize(); ++col)
    for (SpMat::InnerIterator it(k, col); it; ++it) {
      const auto r = free_id[static_cast<std::size_t>(it.row())], c = free_id[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0)
        trip.emplace_back(r, c, it.value());
    }
  SpMat kff(nfree, nfree);
  kff.setFromTriplets(trip.begin(), trip.end());

  Solution sol;
  const Eigen::VectorXd pattern = load_pattern(mesh, load, opt.support, sol.loaded_nodes);

  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool direct = !opt.iterative_only;
  if (direct) {
    ldlt.compute(kff);
    if (ldlt.info() != Eigen::Success) {
      direct = false;
    } else {
      const auto d = ldlt.vectorD();
      if (!(d.minCoeff() > 1e-13 * d.maxCoeff()))
        throw NumericError("singular stiffness matrix (insufficient constraints)");
    }
  }

  for (int s = 1; s <= load.n_steps; ++s) {
    StepResult step;
    step.force_n = load.total_force_n * static_cast<double>(s) / static_cast<double>(load.n_steps);
    const Eigen::VectorXd f = step.force_n * pattern;
    Eigen::VectorXd ff(nfree);
    for (std::size_t d = 0; d < ndof; ++d)
      if (free_id[d] >= 0)
        ff[free_id[d]] = f[static_cast<Eigen::Index>(d)];

    Eigen::VectorXd uf = Eigen::VectorXd::Zero(nfree);
    const double fnorm = ff.norm();
    if (fnorm > 0.0) {
      bool ok = false;
      if (direct) {
        uf = ldlt.solve(ff);
        ok = uf.allFinite() && (kff * uf - ff).norm() <= 1e-8 * fnorm;
      }
      if (!ok) {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
        cg.setTolerance(opt.cg_tolerance);
        cg.setMaxIterations(static_cast<Eigen::Index>(10 * nfree));
        cg.compute(kff);
        uf = cg.solve(ff);
        const double rel = (kff * uf - ff).norm() / fnorm;
        if (cg.info() != Eigen::Success || !uf.allFinite() || !(rel <= 10.0 * opt.cg_tolerance)) {
          std::ostringstream os;
          os << "linear solve failed: relative residual " << rel << " after " << cg.iterations()
             << " CG iterations";
          throw NumericError(os.str());
        }
      }
    }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof));
    for (std::size_t d = 0; d < ndof; ++d)
      if (free_id[d] >= 0)
        u[static_cast<Eigen::Index>(d)] = uf[free_id[d]];
    const Eigen::VectorXd r = k * u - f;
    step.u.assign(u.data(), u.data() + u.size());
    step.reaction.assign(ndof, 0.0);
    for (std::size_t d = 0; d < ndof; ++d)
      if (fixed[d])
        step.reaction[d] = r[static_cast<Eigen::Index>(d)];
    sol.steps.push_back(std::move(step));
  }
  return sol;
}

StrainVector element_strain(const QuadMesh& mesh, std::size_t e, const std::vector<double>& u) {
  const auto xy = corners(mesh, e);
  const auto& el = mesh.elements[e];
  StrainVector eps;
  for (const auto& gp : q4::gauss_points()) {
    const auto g = q4::shape_gradients(xy, gp[0], gp[1]);
    for (int a = 0; a < 4; ++a) {
      const double ux = u[2 * el[a]], uy = u[2 * el[a] + 1];
      eps.c[0] += g.dx[a] * ux;
      eps.c[1] += g.dy[a] * uy;
      eps.c[2] += g.dy[a] * ux + g.dx[a] * uy;
    }
  }
  for (double& v : eps.c)
    v *= 0.25;
  return eps;
}

SampleSet extract_samples(const QuadMesh& mesh, const Solution& sol, double poisson) {
  if (mesh.element_modulus.size() != mesh.elements.size())
    throw ConfigError("mesh has no per-element modulus assigned");
  SampleSet out;
  out.records.reserve(sol.steps.size() * mesh.elements.size());
  std::vector<Point2> centroid(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e)
    centroid[e] = mesh.centroid(e);
  for (std::size_t s = 0; s < sol.steps.size(); ++s)
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      Sample r;
      r.coord = centroid[e];
      r.step = static_cast<int>(s + 1);
      r.strain = element_strain(mesh, e, sol.steps[s].u);
      r.stress.c = matvec(plane_stress_matrix(mesh.element_modulus[e], poisson), r.strain.c);
      out.records.push_back(r);
    }
  return out;
}

SampleSet dual_fea_noise_dataset(const phantom::ModulusField& field, const phantom::NoiseSpec& noise,
                                 QuadMesh mesh, const LoadProgram& load, const SolveOptions& opt) {
  noise.validate();
  std::vector<Point2> sites(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e)
    sites[e] = mesh.centroid(e);

  auto run = [&](std::uint64_t draw) {
    phantom::NoiseSpec spec = noise;
    spec.draw_id = draw;
    assign_modulus(mesh, phantom::apply_noise(field, spec, sites));
    return extract_samples(mesh, assemble_and_solve(mesh, load, opt), opt.poisson);
  };
  SampleSet stresses = run(1);
  const SampleSet strains = run(2);
  for (std::size_t i = 0; i < stresses.records.size(); ++i)
    stresses.records[i].strain = strains.records[i].strain;
  return stresses;
}

} // namespace cann::fesolve
