#include "cann/femesh.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"
#include "q4.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace cann::femesh {

namespace {
const std::vector<std::size_t> kEmpty;
}

const std::vector<std::size_t>& QuadMesh::bottom_nodes() const {
  auto it = node_sets.find("bottom");
  return it == node_sets.end() ? kEmpty : it->second;
}

const std::vector<std::size_t>& QuadMesh::top_nodes() const {
  auto it = node_sets.find("top");
  return it == node_sets.end() ? kEmpty : it->second;
}

BoundingBox QuadMesh::bbox() const {
  BoundingBox b{{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()},
                {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()}};
  for (const auto& p : nodes) {
    b.lo.x = std::min(b.lo.x, p.x);
    b.lo.y = std::min(b.lo.y, p.y);
    b.hi.x = std::max(b.hi.x, p.x);
    b.hi.y = std::max(b.hi.y, p.y);
  }
  return b;
}

Point2 QuadMesh::centroid(std::size_t e) const {
  // Area-weighted centroid of the quadrilateral (isoparametric centre for
  // parallelograms; exact polygon centroid in general).
  const auto& el = elements[e];
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point2& p = nodes[el[i]];
    const Point2& q = nodes[el[(i + 1) % 4]];
    const double cr = p.x * q.y - q.x * p.y;
    a += cr;
    cx += (p.x + q.x) * cr;
    cy += (p.y + q.y) * cr;
  }
  a *= 0.5;
  return {cx / (6.0 * a), cy / (6.0 * a)};
}

double QuadMesh::area(std::size_t e) const {
  const auto& el = elements[e];
  double a = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point2& p = nodes[el[i]];
    const Point2& q = nodes[el[(i + 1) % 4]];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

void assign_boundary_sets(QuadMesh& mesh) {
  const BoundingBox b = mesh.bbox();
  const double tol = 1e-9 * std::max(b.width(), b.height());
  std::vector<std::size_t> bottom, top;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    if (std::abs(mesh.nodes[i].y - b.lo.y) <= tol)
      bottom.push_back(i);
    else if (std::abs(mesh.nodes[i].y - b.hi.y) <= tol)
      top.push_back(i);
  }
  mesh.node_sets["bottom"] = std::move(bottom);
  mesh.node_sets["top"] = std::move(top);
}

QuadMesh make_rectilinear(double width_mm, double height_mm, int elements_x, int elements_y) {
  if (elements_x < 1 || elements_y < 1)
    throw ConfigError("rectilinear mesh needs at least one element per direction");
  if (!(width_mm > 0.0) || !(height_mm > 0.0))
    throw ConfigError("rectilinear mesh needs a positive width and height");
  QuadMesh m;
  const auto nx = static_cast<std::size_t>(elements_x) + 1;
  const auto ny = static_cast<std::size_t>(elements_y) + 1;
  m.nodes.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      m.nodes.push_back({width_mm * static_cast<double>(i) / static_cast<double>(nx - 1),
                         height_mm * static_cast<double>(j) / static_cast<double>(ny - 1)});
  for (std::size_t j = 0; j + 1 < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const std::size_t n0 = j * nx + i;
      m.elements.push_back({n0, n0 + 1, n0 + 1 + nx, n0 + nx});
    }
  assign_boundary_sets(m);
  return m;
}

QuadMesh make_rectilinear(double width_mm, double height_mm, int nodes_per_edge) {
  if (nodes_per_edge < 2)
    throw ConfigError("nodes_per_edge must be at least 2");
  return make_rectilinear(width_mm, height_mm, nodes_per_edge - 1, nodes_per_edge - 1);
}

void validate(const QuadMesh& mesh) {
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& el = mesh.elements[e];
    for (std::size_t n : el)
      if (n >= mesh.nodes.size())
        throw ConfigError("element " + std::to_string(e) + " references missing node " +
                          std::to_string(n));
    std::set<std::size_t> uniq(el.begin(), el.end());
    if (uniq.size() != 4)
      throw ConfigError("element " + std::to_string(e) + " is degenerate (repeated node)");
    const std::array<Point2, 4> xy{mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]],
                                   mesh.nodes[el[3]]};
    for (const auto& gp : q4::gauss_points()) {
      if (!(q4::shape_gradients(xy, gp[0], gp[1]).det_j > 0.0))
        throw ConfigError("element " + std::to_string(e) +
                          " is inverted (non-positive Jacobian at a Gauss point)");
    }
  }
  for (const auto& [name, set] : mesh.node_sets)
    for (std::size_t n : set)
      if (n >= mesh.nodes.size())
        throw ConfigError("node set '" + name + "' references missing node " + std::to_string(n));
  std::set<std::size_t> bottom(mesh.bottom_nodes().begin(), mesh.bottom_nodes().end());
  for (std::size_t n : mesh.top_nodes())
    if (bottom.count(n) != 0)
      throw ConfigError("node " + std::to_string(n) + " is in both bottom and top sets");
}

namespace {

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  if (!parse_double(s, v))
    throw ConfigError("mesh line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::size_t to_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("mesh line " + std::to_string(line) + ": bad index '" + s + "'");
  return v;
}

} // namespace

void save(std::ostream& out, const QuadMesh& mesh) {
  out << "# quad mesh, coordinates in mm, 0-based indices\n";
  out << "NODES\n";
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    out << i << ' ' << fmt_double(mesh.nodes[i].x) << ' ' << fmt_double(mesh.nodes[i].y) << '\n';
  out << "ELEMENTS\n";
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& el = mesh.elements[e];
    out << e << ' ' << el[0] << ' ' << el[1] << ' ' << el[2] << ' ' << el[3] << '\n';
  }
  for (const auto& [name, set] : mesh.node_sets) {
    out << "NODESET " << name << '\n';
    for (std::size_t i = 0; i < set.size(); ++i)
      out << set[i] << ((i + 1) % 16 == 0 || i + 1 == set.size() ? '\n' : ' ');
  }
}

void save(const std::filesystem::path& path, const QuadMesh& mesh) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write mesh file " + path.string());
  save(out, mesh);
}

QuadMesh load(std::istream& in) {
  enum class Section { none, nodes, elements, nodeset };
  Section section = Section::none;
  std::string set_name;
  QuadMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;)
      tok.push_back(t);
    if (tok.empty())
      continue;
    if (tok[0] == "NODES") {
      section = Section::nodes;
      continue;
    }
    if (tok[0] == "ELEMENTS") {
      section = Section::elements;
      continue;
    }
    if (tok[0] == "NODESET") {
      if (tok.size() != 2)
        throw ConfigError("mesh line " + std::to_string(lineno) + ": NODESET needs a name");
      section = Section::nodeset;
      set_name = tok[1];
      mesh.node_sets[set_name];
      continue;
    }
    switch (section) {
    case Section::none:
      throw ConfigError("mesh line " + std::to_string(lineno) + ": data before any section");
    case Section::nodes: {
      if (tok.size() != 3)
        throw ConfigError("mesh line " + std::to_string(lineno) + ": expected 'index x y'");
      if (to_index(tok[0], lineno) != mesh.nodes.size())
        throw ConfigError("mesh line " + std::to_string(lineno) + ": node indices must be sequential");
      mesh.nodes.push_back({to_double(tok[1], lineno), to_double(tok[2], lineno)});
      break;
    }
    case Section::elements: {
      if (tok.size() != 5)
        throw ConfigError("mesh line " + std::to_string(lineno) + ": expected 'index n1 n2 n3 n4'");
      if (to_index(tok[0], lineno) != mesh.elements.size())
        throw ConfigError("mesh line " + std::to_string(lineno) +
                          ": element indices must be sequential");
      mesh.elements.push_back({to_index(tok[1], lineno), to_index(tok[2], lineno),
                               to_index(tok[3], lineno), to_index(tok[4], lineno)});
      break;
    }
    case Section::nodeset:
      for (const auto& t : tok)
        mesh.node_sets[set_name].push_back(to_index(t, lineno));
      break;
    }
  }
  if (mesh.nodes.empty() || mesh.elements.empty())
    throw ConfigError("mesh file has no nodes or no elements");
  if (mesh.node_sets.count("bottom") == 0 || mesh.node_sets.count("top") == 0) {
    auto keep = mesh.node_sets;
    assign_boundary_sets(mesh);
    for (auto& [k, v] : keep)
      mesh.node_sets[k] = v;
  }
  validate(mesh);
  return mesh;
}

QuadMesh load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open mesh file " + path.string());
  return load(in);
}

CoordNormalizer::CoordNormalizer(const BoundingBox& box, double tolerance_mm)
    : center_(box.center()), half_w_(box.width() / 2.0), half_h_(box.height() / 2.0),
      tol_(tolerance_mm) {
  if (!(half_w_ > 0.0) || !(half_h_ > 0.0))
    throw ConfigError("cannot normalize coordinates on a zero-extent mesh");
}

CoordNormalizer CoordNormalizer::from_parts(Point2 center, double half_width, double half_height,
                                            double tolerance_mm) {
  if (!(half_width > 0.0) || !(half_height > 0.0) || !(tolerance_mm >= 0.0))
    throw ConfigError("invalid coordinate normalization");
  CoordNormalizer n;
  n.center_ = center;
  n.half_w_ = half_width;
  n.half_h_ = half_height;
  n.tol_ = tolerance_mm;
  return n;
}

NormalizedCoord CoordNormalizer::operator()(Point2 p) const {
  const double dx = p.x - center_.x;
  const double dy = p.y - center_.y;
  if (std::abs(dx) > half_w_ + tol_ || std::abs(dy) > half_h_ + tol_) {
    std::ostringstream os;
    os << "point (" << p.x << ", " << p.y << ") mm lies outside the mesh bounding box";
    throw ConfigError(os.str());
  }
  return {std::clamp(dx / half_w_, -1.0, 1.0), std::clamp(dy / half_h_, -1.0, 1.0)};
}

NormalizedCoord normalize_coord(const QuadMesh& mesh, Point2 p) {
  return CoordNormalizer(mesh.bbox())(p);
}

// ---------------------------------------------------------------------------
// Disc-conforming O-grid mesh

Point2 block_center(const DiscMeshSpec& spec, const DiscBlock& b) {
  const double dx = spec.width_mm / static_cast<double>(spec.elements_x);
  const double dy = spec.height_mm / static_cast<double>(spec.elements_y);
  return {dx * (static_cast<double>(b.col0) + static_cast<double>(b.cols) / 2.0),
          dy * (static_cast<double>(b.row0) + static_cast<double>(b.rows) / 2.0)};
}

namespace {

// Parameter-space positions (on the boundary of [-1,1]^2) of the footprint
// loop, counter-clockwise from the lower-left corner, plus the grid (i, j)
// offsets of each loop node within the footprint.
struct LoopParam {
  std::vector<std::array<double, 2>> dir;
  std::vector<std::array<std::size_t, 2>> ij;
};

LoopParam footprint_loop(std::size_t cols, std::size_t rows) {
  LoopParam lp;
  auto push = [&](std::size_t i, std::size_t j) {
    lp.ij.push_back({i, j});
    lp.dir.push_back({-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(cols),
                      -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(rows)});
  };
  for (std::size_t i = 0; i < cols; ++i)
    push(i, 0);
  for (std::size_t j = 0; j < rows; ++j)
    push(cols, j);
  for (std::size_t i = cols; i > 0; --i)
    push(i, rows);
  for (std::size_t j = rows; j > 0; --j)
    push(0, j);
  return lp;
}

Point2 on_circle(Point2 c, double r, std::array<double, 2> d) {
  const double n = std::hypot(d[0], d[1]);
  return {c.x + r * d[0] / n, c.y + r * d[1] / n};
}

} // namespace

QuadMesh make_disc_conforming(const DiscMeshSpec& spec) {
  const std::size_t nx = spec.elements_x, ny = spec.elements_y;
  if (nx < 1 || ny < 1)
    throw ConfigError("disc mesh: background grid needs at least one element");
  const double dx = spec.width_mm / static_cast<double>(nx);
  const double dy = spec.height_mm / static_cast<double>(ny);

  // Which background cells are owned by a block; which grid nodes are interior to one.
  std::vector<int> cell_owner(nx * ny, -1);
  std::vector<bool> node_hidden((nx + 1) * (ny + 1), false);
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& blk = spec.blocks[b];
    if (blk.cols < 1 || blk.rows < 1 || blk.col0 + blk.cols > nx || blk.row0 + blk.rows > ny)
      throw ConfigError("disc mesh: block " + std::to_string(b) + " footprint leaves the grid");
    if (blk.radii.empty())
      throw ConfigError("disc mesh: block " + std::to_string(b) + " has no circles");
    for (std::size_t k = 0; k < blk.radii.size(); ++k)
      if (!(blk.radii[k] > 0.0) || (k > 0 && !(blk.radii[k] > blk.radii[k - 1])))
        throw ConfigError("disc mesh: block radii must be positive and increasing");
    const double half_min = std::min(dx * static_cast<double>(blk.cols), dy * static_cast<double>(blk.rows)) / 2.0;
    if (!(blk.radii.back() < half_min))
      throw ConfigError("disc mesh: outer circle of block " + std::to_string(b) +
                        " does not fit inside its footprint");
    for (std::size_t j = blk.row0; j < blk.row0 + blk.rows; ++j)
      for (std::size_t i = blk.col0; i < blk.col0 + blk.cols; ++i) {
        if (cell_owner[j * nx + i] != -1)
          throw ConfigError("disc mesh: block footprints overlap");
        cell_owner[j * nx + i] = static_cast<int>(b);
      }
    for (std::size_t j = blk.row0 + 1; j < blk.row0 + blk.rows; ++j)
      for (std::size_t i = blk.col0 + 1; i < blk.col0 + blk.cols; ++i)
        node_hidden[j * (nx + 1) + i] = true;
  }

  QuadMesh mesh;
  std::vector<std::size_t> grid_id((nx + 1) * (ny + 1), std::numeric_limits<std::size_t>::max());
  for (std::size_t j = 0; j <= ny; ++j)
    for (std::size_t i = 0; i <= nx; ++i) {
      if (node_hidden[j * (nx + 1) + i])
        continue;
      grid_id[j * (nx + 1) + i] = mesh.nodes.size();
      mesh.nodes.push_back({dx * static_cast<double>(i), dy * static_cast<double>(j)});
    }

  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      if (cell_owner[j * nx + i] != -1)
        continue;
      auto g = [&](std::size_t a, std::size_t b) { return grid_id[b * (nx + 1) + a]; };
      mesh.elements.push_back({g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1)});
    }

  for (const auto& blk : spec.blocks) {
    const Point2 c = block_center(spec, blk);
    const LoopParam lp = footprint_loop(blk.cols, blk.rows);
    const std::size_t P = lp.dir.size();

    // Loops from innermost circle to the footprint boundary.
    std::vector<std::vector<std::size_t>> loops;
    for (double r : blk.radii) {
      std::vector<std::size_t> ids;
      for (std::size_t k = 0; k < P; ++k) {
        ids.push_back(mesh.nodes.size());
        mesh.nodes.push_back(on_circle(c, r, lp.dir[k]));
      }
      loops.push_back(std::move(ids));
    }
    std::vector<std::size_t> boundary;
    for (std::size_t k = 0; k < P; ++k)
      boundary.push_back(grid_id[(blk.row0 + lp.ij[k][1]) * (nx + 1) + blk.col0 + lp.ij[k][0]]);
    for (std::size_t t = 1; t <= blk.transition_loops; ++t) {
      const double s = static_cast<double>(t) / static_cast<double>(blk.transition_loops + 1);
      std::vector<std::size_t> ids;
      for (std::size_t k = 0; k < P; ++k) {
        const Point2 a = on_circle(c, blk.radii.back(), lp.dir[k]);
        const Point2 b = mesh.nodes[boundary[k]];
        ids.push_back(mesh.nodes.size());
        mesh.nodes.push_back({(1.0 - s) * a.x + s * b.x, (1.0 - s) * a.y + s * b.y});
      }
      loops.push_back(std::move(ids));
    }
    loops.push_back(boundary);

    for (std::size_t l = 0; l + 1 < loops.size(); ++l)
      for (std::size_t k = 0; k < P; ++k) {
        const std::size_t k1 = (k + 1) % P;
        mesh.elements.push_back({loops[l][k], loops[l + 1][k], loops[l + 1][k1], loops[l][k1]});
      }

    // Core: a cols x rows patch whose boundary is the innermost circle. Interior
    // nodes blend from square (centre) to circular (edge) shape.
    const double r0 = blk.radii.front();
    std::vector<std::size_t> core((blk.cols + 1) * (blk.rows + 1));
    for (std::size_t k = 0; k < P; ++k)
      core[lp.ij[k][1] * (blk.cols + 1) + lp.ij[k][0]] = loops.front()[k];
    for (std::size_t j = 1; j < blk.rows; ++j)
      for (std::size_t i = 1; i < blk.cols; ++i) {
        const double u = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(blk.cols);
        const double v = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(blk.rows);
        const double cheb = std::max(std::abs(u), std::abs(v));
        const double eu = std::hypot(u, v);
        const double round = eu > 0.0 ? cheb / eu : 1.0;
        const double f = r0 * ((1.0 - cheb) + cheb * round);
        core[j * (blk.cols + 1) + i] = mesh.nodes.size();
        mesh.nodes.push_back({c.x + f * u, c.y + f * v});
      }
    for (std::size_t j = 0; j < blk.rows; ++j)
      for (std::size_t i = 0; i < blk.cols; ++i) {
        auto n = [&](std::size_t a, std::size_t b) { return core[b * (blk.cols + 1) + a]; };
        mesh.elements.push_back({n(i, j), n(i + 1, j), n(i + 1, j + 1), n(i, j + 1)});
      }
  }

  assign_boundary_sets(mesh);
  validate(mesh);
  return mesh;
}

DiscMeshSpec three_inclusion_layout() {
  DiscMeshSpec spec;
  spec.width_mm = 50.0;
  spec.height_mm = 50.0;
  spec.elements_x = 13;
  spec.elements_y = 13;
  spec.blocks = {
      {1, 5, 3, 2, {3.0}, 0},
      {4, 4, 4, 4, {2.5, 6.0}, 1},
      {9, 5, 2, 2, {3.0}, 0},
  };
  return spec;
}

} // namespace cann::femesh
