#pragma once

#include "cann/types.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cann::femesh {

using Element = std::array<std::size_t, 4>; // counter-clockwise node indices

struct BoundingBox {
  Point2 lo;
  Point2 hi;
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  Point2 center() const { return {(lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0}; }
};

// Bilinear quadrilateral mesh in millimetres.
struct QuadMesh {
  std::vector<Point2> nodes;
  std::vector<Element> elements;
  // "bottom" and "top" drive the boundary conditions; other names are kept verbatim.
  std::map<std::string, std::vector<std::size_t>> node_sets;
  // Pa, one per element; empty until a material field is assigned.
  std::vector<double> element_modulus;

  const std::vector<std::size_t>& bottom_nodes() const;
  const std::vector<std::size_t>& top_nodes() const;

  BoundingBox bbox() const;
  // Mesh centre; coordinates relative to it are what the spatial network sees.
  Point2 origin_offset() const { return bbox().center(); }

  Point2 centroid(std::size_t e) const;
  double area(std::size_t e) const;
};

// Uniform grid of (nodes_per_edge - 1)^2 elements on [0, width] x [0, height].
QuadMesh make_rectilinear(double width_mm, double height_mm, int nodes_per_edge);
QuadMesh make_rectilinear(double width_mm, double height_mm, int elements_x, int elements_y);

// Fills "bottom"/"top" from the y extrema (tolerance relative to the extent).
void assign_boundary_sets(QuadMesh& mesh);

// Throws ConfigError naming the first offending element (dangling index,
// repeated node, non-positive Jacobian at a Gauss point) or overlapping boundary sets.
void validate(const QuadMesh& mesh);

// Text format: NODES / ELEMENTS / NODESET <name> sections, 0-based indices.
void save(std::ostream& out, const QuadMesh& mesh);
void save(const std::filesystem::path& path, const QuadMesh& mesh);
QuadMesh load(std::istream& in);
QuadMesh load(const std::filesystem::path& path);

struct NormalizedCoord {
  double x = 0.0;
  double y = 0.0;
};

// Affine map of the mesh bounding box onto [-1, 1]^2 centred at the mesh centre.
class CoordNormalizer {
public:
  CoordNormalizer() = default;
  explicit CoordNormalizer(const BoundingBox& box, double tolerance_mm = 1e-9);
  static CoordNormalizer from_parts(Point2 center, double half_width, double half_height, double tolerance_mm);

  // Throws ConfigError for points outside the box (beyond the tolerance).
  NormalizedCoord operator()(Point2 p) const;

  Point2 center() const { return center_; }
  double half_width() const { return half_w_; }
  double half_height() const { return half_h_; }
  double tolerance() const { return tol_; }

private:
  Point2 center_;
  double half_w_ = 1.0;
  double half_h_ = 1.0;
  double tol_ = 1e-9;
};

NormalizedCoord normalize_coord(const QuadMesh& mesh, Point2 p);

// One circular inclusion meshed as an O-grid inside a rectangular footprint of
// the background grid. The core (cols x rows cells) is bounded by the first
// circle; each further circle and each transition loop adds one ring of
// 2 * (cols + rows) elements. The footprint boundary stays on the grid.
struct DiscBlock {
  std::size_t col0 = 0;
  std::size_t row0 = 0;
  std::size_t cols = 2;
  std::size_t rows = 2;
  std::vector<double> radii; // strictly increasing circle radii, mm
  std::size_t transition_loops = 0;
};

struct DiscMeshSpec {
  double width_mm = 50.0;
  double height_mm = 50.0;
  std::size_t elements_x = 13;
  std::size_t elements_y = 13;
  std::vector<DiscBlock> blocks;
};

QuadMesh make_disc_conforming(const DiscMeshSpec& spec);

// Layout of the shipped three-inclusion mesh (235 elements): 13 x 13 background,
// nested 2.5 / 6 mm discs on a 4 x 4 core, 3 mm side discs.
DiscMeshSpec three_inclusion_layout();

// Centre of a block's footprint; the block's circles are concentric about it.
Point2 block_center(const DiscMeshSpec& spec, const DiscBlock& block);

} // namespace cann::femesh
