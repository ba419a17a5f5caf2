#include "cann/grid_io.hpp"

#include "cann/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cann {

namespace {

// Reads whitespace-separated tokens, skipping '#' comments to end of line.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      if (!tok.empty())
        return true;
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty())
        return true;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return !tok.empty();
}

std::size_t parse_size(const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos != tok.size() || v <= 0)
      throw ConfigError("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string("bad ") + what + " '" + tok + "'");
  }
}

} // namespace

Grid read_grid_text(std::istream& in) {
  std::string tok;
  if (!next_token(in, tok))
    throw ConfigError("grid file is empty");
  const std::size_t rows = parse_size(tok, "row count");
  if (!next_token(in, tok))
    throw ConfigError("grid file has no column count");
  const std::size_t cols = parse_size(tok, "column count");
  Grid g(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    if (!next_token(in, tok))
      throw ConfigError("grid file ended after " + std::to_string(i) + " of " +
                        std::to_string(rows * cols) + " values");
    try {
      std::size_t pos = 0;
      g.values[i] = std::stod(tok, &pos);
      if (pos != tok.size())
        throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + tok + "'");
    }
    if (!std::isfinite(g.values[i]))
      throw ConfigError("non-finite grid value");
  }
  if (next_token(in, tok))
    throw ConfigError("grid file has trailing data");
  return g;
}

Grid read_grid_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open grid file " + path.string());
  return read_grid_text(in);
}

void write_grid_text(std::ostream& out, const Grid& g) {
  out << g.rows << ' ' << g.cols << '\n';
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c)
      out << (c ? " " : "") << g.at(r, c);
    out << '\n';
  }
}

Grid read_pgm(std::istream& in) {
  std::string magic, tok;
  if (!next_token(in, magic) || (magic != "P5" && magic != "P2"))
    throw ConfigError("not a PGM file (expected P5 or P2)");
  if (!next_token(in, tok))
    throw ConfigError("PGM header truncated");
  const std::size_t cols = parse_size(tok, "PGM width");
  if (!next_token(in, tok))
    throw ConfigError("PGM header truncated");
  const std::size_t rows = parse_size(tok, "PGM height");
  if (!next_token(in, tok))
    throw ConfigError("PGM header truncated");
  const std::size_t maxval = parse_size(tok, "PGM maxval");
  if (maxval > 255)
    throw ConfigError("only 8-bit PGM files are supported");
  Grid g(rows, cols);
  if (magic == "P5") {
    // next_token consumed exactly one whitespace byte after maxval
    std::vector<unsigned char> buf(rows * cols);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
      throw ConfigError("PGM pixel data truncated");
    for (std::size_t i = 0; i < buf.size(); ++i)
      g.values[i] = buf[i];
  } else {
    for (std::size_t i = 0; i < rows * cols; ++i) {
      if (!next_token(in, tok))
        throw ConfigError("PGM pixel data truncated");
      int v = -1;
      auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || end != tok.data() + tok.size() || v < 0 || v > static_cast<int>(maxval))
        throw ConfigError("bad PGM pixel '" + tok + "'");
      g.values[i] = v;
    }
  }
  return g;
}

Grid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open PGM file " + path.string());
  return read_pgm(in);
}

void write_pgm(std::ostream& out, const Grid& g, double lo, double hi) {
  out << "P5\n" << g.cols << ' ' << g.rows << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (double v : g.values) {
    const double t = hi > lo ? (v - lo) / span : 0.5;
    const long q = std::lround(std::clamp(t, 0.0, 1.0) * 255.0);
    out.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
}

void write_pgm(const std::filesystem::path& path, const Grid& g, double lo, double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot write PGM file " + path.string());
  write_pgm(out, g, lo, hi);
}

Grid read_raster(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" ? read_pgm(path) : read_grid_text(path);
}

} // namespace cann
