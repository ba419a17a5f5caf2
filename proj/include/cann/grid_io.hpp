#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cann {

// Row-major raster; row 0 is the top of the image.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool empty() const { return values.empty(); }
};

// Plain text: "rows cols" header, then row-major values. '#' starts a comment.
Grid read_grid_text(std::istream& in);
Grid read_grid_text(const std::filesystem::path& path);
void write_grid_text(std::ostream& out, const Grid& g);

// 8-bit PGM, binary (P5) or ASCII (P2). Values are returned as 0..maxval.
Grid read_pgm(std::istream& in);
Grid read_pgm(const std::filesystem::path& path);
// Linear map of [lo, hi] onto 0..255 with clamping; P5 output.
void write_pgm(std::ostream& out, const Grid& g, double lo, double hi);
void write_pgm(const std::filesystem::path& path, const Grid& g, double lo, double hi);

// Picks the reader from the extension (.pgm or text).
Grid read_raster(const std::filesystem::path& path);

} // namespace cann
