#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "selros/errors.hpp"

namespace selros {

enum class CellState : std::uint8_t { Free, Occupied, Unknown };

struct CellCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const CellCoord& a, const CellCoord& b) {
    return a.x == b.x && a.y == b.y;
  }
  friend bool operator!=(const CellCoord& a, const CellCoord& b) { return !(a == b); }
  friend bool operator<(const CellCoord& a, const CellCoord& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;  // row-major order
  }
};

// 2D occupancy map. Cells are stored row-major, resolution is meters per cell.
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.05;
  std::vector<CellState> cells;

  OccupancyGrid() = default;
  OccupancyGrid(int w, int h, double res, CellState fill = CellState::Unknown)
      : width(w), height(h), resolution(res),
        cells(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  CellState at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  CellState& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
  bool is_free(int x, int y) const { return at(x, y) == CellState::Free; }
  std::size_t size() const { return cells.size(); }
};

// Room-id raster; 0 means "not part of any room". A map is dense when the
// ids present are exactly {1..K}.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int w, int h, int fill = 0)
      : width(w), height(h),
        labels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  int& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return labels.size(); }

  // Highest id present; equals K for dense maps.
  int room_count() const {
    int k = 0;
    for (int v : labels) k = std::max(k, v);
    return k;
  }

  bool is_dense() const {
    int k = room_count();
    std::vector<char> seen(static_cast<std::size_t>(k) + 1, 0);
    for (int v : labels) {
      if (v < 0) return false;
      seen[static_cast<std::size_t>(v)] = 1;
    }
    for (int id = 1; id <= k; ++id)
      if (!seen[static_cast<std::size_t>(id)]) return false;
    return true;
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.width == b.width && a.height == b.height && a.labels == b.labels;
  }
};

// old-id -> new-id pairs produced by densification, in first-appearance order.
struct LabelRemap {
  std::vector<std::pair<int, int>> entries;

  bool identity() const {
    for (const auto& [from, to] : entries)
      if (from != to) return false;
    return true;
  }
};

struct LabelMapReadResult {
  LabelMap map;
  LabelRemap remap;
};

// ---------------------------------------------------------------------------
// Occupancy map I/O (PGM P2/P5)

inline CellState classify_pixel(int value) {
  if (value >= 250) return CellState::Free;
  if (value <= 50) return CellState::Occupied;
  return CellState::Unknown;
}

namespace detail {

// Pulls header tokens out of a PGM, honoring '#' comment lines. A comment of
// the form "# resolution: <float>" sets the grid resolution.
class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::istream& in) : in_(in) {}

  std::string next_token() {
    skip_separators();
    std::string tok;
    int c;
    while ((c = in_.peek()) != EOF && !std::isspace(c)) {
      tok.push_back(static_cast<char>(in_.get()));
    }
    if (tok.empty())
      throw ParseError("unexpected end of PGM header", position());
    return tok;
  }

  int next_int(const char* what) {
    std::string tok = next_token();
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ParseError(std::string("expected integer for ") + what + ", got '" + tok + "'",
                       position());
    }
  }

  // Consumes exactly one separator byte after the maxval (binary rasters
  // start right after it).
  void consume_single_separator() { in_.get(); }

  bool resolution_seen() const { return resolution_seen_; }
  double resolution() const { return resolution_; }
  std::size_t position() const {
    auto p = in_.tellg();
    return p < 0 ? 0 : static_cast<std::size_t>(p);
  }

 private:
  void skip_separators() {
    int c;
    while ((c = in_.peek()) != EOF) {
      if (c == '#') {
        std::string line;
        std::getline(in_, line);
        parse_comment(line);
      } else if (std::isspace(c)) {
        in_.get();
      } else {
        break;
      }
    }
  }

  void parse_comment(const std::string& line) {
    // line starts with '#'
    std::size_t i = 1;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::string key = "resolution:";
    if (line.compare(i, key.size(), key) == 0) {
      try {
        resolution_ = std::stod(line.substr(i + key.size()));
        resolution_seen_ = true;
      } catch (const std::exception&) {
        throw ParseError("malformed resolution comment: '" + line + "'", position());
      }
    }
  }

  std::istream& in_;
  bool resolution_seen_ = false;
  double resolution_ = 0.0;
};

}  // namespace detail

// Reads a P2/P5 portable graymap into an OccupancyGrid. Pixels >= 250 are
// Free, <= 50 Occupied, anything else Unknown. Resolution comes from an
// optional "# resolution: <float>" header comment (default 0.05 m/cell).
inline OccupancyGrid read_occupancy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open occupancy map: " + path);

  detail::PgmHeaderReader header(in);
  std::string magic = header.next_token();
  if (magic != "P2" && magic != "P5")
    throw UnsupportedFormat("unsupported netpbm magic '" + magic + "' (want P2 or P5)");

  int width = header.next_int("width");
  int height = header.next_int("height");
  if (width < 1 || height < 1)
    throw ParseError("PGM dimensions must be positive", header.position());
  int maxval = header.next_int("maxval");
  if (maxval != 255)
    throw ParseError("unsupported maxval " + std::to_string(maxval) + " (want 255)",
                     header.position());

  OccupancyGrid grid(width, height,
                     header.resolution_seen() ? header.resolution() : 0.05);
  if (grid.resolution <= 0.0)
    throw ParseError("resolution must be positive", header.position());

  const std::size_t n = grid.size();
  if (magic == "P5") {
    header.consume_single_separator();
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw ParseError("truncated P5 raster", header.position());
    for (std::size_t i = 0; i < n; ++i) grid.cells[i] = classify_pixel(raw[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      int v = header.next_int("pixel");
      if (v < 0 || v > maxval)
        throw ParseError("pixel value " + std::to_string(v) + " out of range",
                         header.position());
      grid.cells[i] = classify_pixel(v);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Label map I/O (canonical text grid)

// Remaps ids in-place so the set of ids present becomes {1..K}, numbered by
// first appearance in row-major order. Returns the old->new mapping.
inline LabelRemap densify(LabelMap& map) {
  LabelRemap remap;
  std::vector<int> lookup;  // old id -> new id + 1 (0 = unseen)
  int next = 1;
  for (int& v : map.labels) {
    if (v == 0) continue;
    if (static_cast<std::size_t>(v) >= lookup.size())
      lookup.resize(static_cast<std::size_t>(v) + 1, 0);
    if (lookup[static_cast<std::size_t>(v)] == 0) {
      lookup[static_cast<std::size_t>(v)] = next;
      remap.entries.emplace_back(v, next);
      ++next;
    }
    v = lookup[static_cast<std::size_t>(v)];
  }
  return remap;
}

// Reads the canonical label grid: first line "<width> <height>", then
// `height` rows of `width` space-separated non-negative integers. Ids are
// densified on load; the remap report says what moved.
inline LabelMapReadResult read_label_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label map: " + path);

  std::string first;
  if (!std::getline(in, first)) throw ParseError("empty label map file");
  std::istringstream head(first);
  int width = 0, height = 0;
  if (!(head >> width >> height) || width < 1 || height < 1)
    throw ParseError("malformed label map size line: '" + first + "'");
  std::string extra;
  if (head >> extra) throw ParseError("trailing tokens on size line: '" + first + "'");

  LabelMap map(width, height);
  std::string line;
  for (int y = 0; y < height; ++y) {
    if (!std::getline(in, line))
      throw ShapeError("label map ends after " + std::to_string(y) + " of " +
                       std::to_string(height) + " rows");
    std::istringstream row(line);
    std::string tok;
    for (int x = 0; x < width; ++x) {
      if (!(row >> tok))
        throw ShapeError("row " + std::to_string(y) + " has fewer than " +
                         std::to_string(width) + " values");
      try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        if (v < 0) throw std::invalid_argument(tok);
        map.at(x, y) = v;
      } catch (const std::exception&) {
        throw ParseError("invalid label token '" + tok + "' at row " + std::to_string(y));
      }
    }
    if (row >> tok)
      throw ShapeError("row " + std::to_string(y) + " has more than " +
                       std::to_string(width) + " values");
  }

  LabelMapReadResult result;
  result.map = std::move(map);
  result.remap = densify(result.map);
  return result;
}

inline void write_label_map(const LabelMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << map.width << ' ' << map.height << '\n';
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (x) out << ' ';
      out << map.at(x, y);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Colorized export (PPM P6 + legend sidecar)

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb& a, const Rgb& b) {
    return a.r == b.r && a.g == b.g && a.b == b.b;
  }
};

namespace detail {

inline Rgb hsv_to_rgb(double h, double s, double v) {
  h -= std::floor(h);
  double hf = h * 6.0;
  int sector = static_cast<int>(hf) % 6;
  double f = hf - std::floor(hf);
  double p = v * (1.0 - s);
  double q = v * (1.0 - f * s);
  double t = v * (1.0 - (1.0 - f) * s);
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  auto to_byte = [](double x) {
    return static_cast<std::uint8_t>(std::lround(x * 255.0));
  };
  return {to_byte(r), to_byte(g), to_byte(b)};
}

inline std::uint32_t pack_rgb(const Rgb& c) {
  return (std::uint32_t(c.r) << 16) | (std::uint32_t(c.g) << 8) | std::uint32_t(c.b);
}

}  // namespace detail

// Colors for room ids 1..count. Hue follows a golden-ratio rotation at full
// saturation/value; after 8-bit quantization two rotation steps can land on
// the same RGB triple, so colors that are already taken advance by one hue
// quantum until free. Black stays reserved for id 0.
inline std::vector<Rgb> build_palette(int count) {
  constexpr double kGoldenRatioConjugate = 0.6180339887498949;
  constexpr double kHueQuantum = 1.0 / 1530.0;  // one 8-bit step along the hue locus
  std::vector<Rgb> colors;
  colors.reserve(static_cast<std::size_t>(std::max(count, 0)));
  std::set<std::uint32_t> used{0u};
  for (int id = 1; id <= count; ++id) {
    double hue = std::fmod(id * kGoldenRatioConjugate, 1.0);
    double value = 1.0;
    Rgb c = detail::hsv_to_rgb(hue, 1.0, value);
    int probes = 0;
    while (used.count(detail::pack_rgb(c))) {
      hue += kHueQuantum;
      if (++probes % 1531 == 0) value -= 0.1;  // locus exhausted, very large K
      c = detail::hsv_to_rgb(hue, 1.0, value);
    }
    used.insert(detail::pack_rgb(c));
    colors.push_back(c);
  }
  return colors;
}

inline Rgb palette_color(int id) {
  if (id <= 0) return Rgb{0, 0, 0};
  return build_palette(id).back();
}

// Writes a binary PPM where room k gets palette color k and id 0 is black,
// plus a "<path>.legend" sidecar listing "id R G B" per room.
inline void export_ppm(const LabelMap& map, const std::string& path) {
  if (!map.is_dense())
    throw std::invalid_argument("export_ppm requires a dense label map");
  const int k = map.room_count();
  const std::vector<Rgb> palette = build_palette(k);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << map.width << ' ' << map.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(map.width) * 3);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      Rgb c{0, 0, 0};
      int id = map.at(x, y);
      if (id > 0) c = palette[static_cast<std::size_t>(id) - 1];
      row[static_cast<std::size_t>(x) * 3 + 0] = c.r;
      row[static_cast<std::size_t>(x) * 3 + 1] = c.g;
      row[static_cast<std::size_t>(x) * 3 + 2] = c.b;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);

  std::ofstream legend(path + ".legend", std::ios::trunc);
  if (!legend) throw IoError("cannot open for writing: " + path + ".legend");
  for (int id = 1; id <= k; ++id) {
    const Rgb& c = palette[static_cast<std::size_t>(id) - 1];
    legend << id << ' ' << int(c.r) << ' ' << int(c.g) << ' ' << int(c.b) << '\n';
  }
  if (!legend) throw IoError("write failed: " + path + ".legend");
}

}  // namespace selros
