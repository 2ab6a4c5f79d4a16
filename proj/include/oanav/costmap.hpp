#pragma once

#include "oanav/affordance.hpp"
#include "oanav/geometry.hpp"
#include "oanav/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace oanav {

inline constexpr std::uint8_t kLethal = 254;
inline constexpr std::uint8_t kInscribed = 253;

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

/// Row-major 2D cost grid; cell (0, 0) covers [origin, origin + resolution).
struct Grid2 {
  double resolution = 0.05;
  Vec2 origin = Vec2::Zero();
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cost;

  static Grid2 empty_like(const Grid2& g);
  static Grid2 covering(const Rect& r, double resolution);

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::uint8_t at(int x, int y) const { return cost[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return cost[index(x, y)]; }
  Vec2 center(int x, int y) const { return origin + Vec2((x + 0.5) * resolution, (y + 0.5) * resolution); }
  std::optional<Cell> cell_of(const Vec2& p) const;
  /// Cost at a world point; lethal outside the grid.
  std::uint8_t cost_at(const Vec2& p) const;
  bool same_geometry(const Grid2& o) const;
};

/// Walls (and, when `with_furniture`, ground-truth furniture footprints)
/// rasterized as lethal by cell center.
Grid2 background_map(const Scene& scene, double resolution = 0.05, bool with_furniture = true);
/// Marks the cells containing the given world points lethal.
void mark_points(Grid2& grid, std::span<const Vec3> points);

/// Euclidean distance (m) from each cell center to the nearest cell with
/// cost >= `threshold`; infinity when there is none.
std::vector<double> distance_transform(const Grid2& grid, std::uint8_t threshold = kLethal);

/// Inscribed cost within robot_radius of a lethal cell, exponential decay
/// 252 exp(-k (d - robot_radius)) out to inflation_radius, 0 beyond.
Grid2 inflate(const Grid2& map, double robot_radius, double inflation_radius, double decay = 10.0);
std::uint8_t inflation_cost(double distance, double robot_radius, double inflation_radius, double decay = 10.0);

/// Affordance costs of one object plus its lethal footprint.
Grid2 object_layer(const YawPose& pose, const Vec3& size, const AffordanceSpec& spec, const Grid2& grid_template);
/// Rasterized affordance cost at a world point (ceil of the continuous cost).
std::uint8_t affordance_cell_cost(const AffordanceSpec& spec, const YawPose& pose, const Vec2& p);

/// Cellwise maximum.
Grid2 merge(const Grid2& background, std::span<const Grid2> layers);
/// In-place max of `layer` into `dst`.
void merge_into(Grid2& dst, const Grid2& layer);

/// Binary PGM (P5), value 255 - cost, first row at the top (max y), with a
/// companion <path>.txt holding resolution, origin and size.
void write_pgm(const Grid2& grid, const std::filesystem::path& path);
Grid2 read_pgm(const std::filesystem::path& path);

}  // namespace oanav
