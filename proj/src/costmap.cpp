#include "oanav/costmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace oanav {

Grid2 Grid2::empty_like(const Grid2& g) {
  Grid2 out = g;
  std::fill(out.cost.begin(), out.cost.end(), std::uint8_t{0});
  return out;
}

Grid2 Grid2::covering(const Rect& r, double resolution) {
  if (!(resolution > 0.0)) throw Error("grid resolution must be positive");
  Grid2 g;
  g.resolution = resolution;
  g.origin = Vec2(r.xmin, r.ymin);
  g.width = static_cast<int>(std::ceil(r.width() / resolution - 1e-9));
  g.height = static_cast<int>(std::ceil(r.height() / resolution - 1e-9));
  if (g.width <= 0 || g.height <= 0) throw Error("grid must cover a non-empty area");
  g.cost.assign(static_cast<std::size_t>(g.width) * g.height, 0);
  return g;
}

std::optional<Cell> Grid2::cell_of(const Vec2& p) const {
  const int x = static_cast<int>(std::floor((p.x() - origin.x()) / resolution));
  const int y = static_cast<int>(std::floor((p.y() - origin.y()) / resolution));
  if (!in_bounds(x, y)) return std::nullopt;
  return Cell{x, y};
}

std::uint8_t Grid2::cost_at(const Vec2& p) const {
  const auto c = cell_of(p);
  return c ? at(c->x, c->y) : kLethal;
}

bool Grid2::same_geometry(const Grid2& o) const {
  return width == o.width && height == o.height && resolution == o.resolution && origin == o.origin;
}

namespace {

bool in_footprint(const YawPose& pose, const Vec3& size, const Vec2& p) {
  const Vec2 l = to_object_frame(pose, p);
  return std::abs(l.x()) <= 0.5 * size.x() && std::abs(l.y()) <= 0.5 * size.y();
}

}  // namespace

Grid2 background_map(const Scene& scene, double resolution, bool with_furniture) {
  Grid2 g = Grid2::covering(scene.bounds, resolution);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const Vec2 c = g.center(x, y);
      bool hit = false;
      for (const auto& w : scene.walls) {
        if (c.x() >= w.min.x() && c.x() <= w.max.x() && c.y() >= w.min.y() && c.y() <= w.max.y()) {
          hit = true;
          break;
        }
      }
      if (!hit && with_furniture) {
        for (const auto& o : scene.objects) {
          if (in_footprint(o.pose, nominal_size(o.cls, o.model_seed), c)) {
            hit = true;
            break;
          }
        }
      }
      if (hit) g.at(x, y) = kLethal;
    }
  }
  return g;
}

void mark_points(Grid2& grid, std::span<const Vec3> points) {
  for (const auto& p : points) {
    if (const auto c = grid.cell_of(p.head<2>())) grid.at(c->x, c->y) = kLethal;
  }
}

namespace {

// Exact 1D squared distance transform of sampled function f (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == inf) continue;
    if (f[v[k]] == inf) {
      v[k] = q;
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    while (k > 0 && s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (f[v[0]] == inf) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const Grid2& grid, std::uint8_t threshold) {
  const int w = grid.width;
  const int h = grid.height;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = grid.cost[i] >= threshold ? 0.0 : inf;

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = sq[grid.index(x, y)];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq[grid.index(x, y)] = d[x];
  }
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = sq[grid.index(x, y)];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq[grid.index(x, y)] = d[y];
  }
  for (auto& s : sq) s = std::isinf(s) ? inf : std::sqrt(s) * grid.resolution;
  return sq;
}

std::uint8_t inflation_cost(double distance, double robot_radius, double inflation_radius, double decay) {
  if (distance <= 0.0) return kLethal;
  if (distance <= robot_radius + 1e-9) return kInscribed;
  if (distance > inflation_radius + 1e-9) return 0;
  return static_cast<std::uint8_t>(std::floor((kInscribed - 1) * std::exp(-decay * (distance - robot_radius))));
}

Grid2 inflate(const Grid2& map, double robot_radius, double inflation_radius, double decay) {
  if (!(robot_radius >= 0.0)) throw Error("inflate: negative robot radius");
  if (inflation_radius < robot_radius) throw Error("inflate: inflation radius below robot radius");
  Grid2 out = map;
  const auto dist = distance_transform(map, kLethal);
  for (std::size_t i = 0; i < out.cost.size(); ++i) {
    if (map.cost[i] >= kLethal) continue;
    out.cost[i] = std::max(map.cost[i], inflation_cost(dist[i], robot_radius, inflation_radius, decay));
  }
  return out;
}

std::uint8_t affordance_cell_cost(const AffordanceSpec& spec, const YawPose& pose, const Vec2& p) {
  const double c = spec.cost_local(to_object_frame(pose, p));
  if (c <= 0.0) return 0;
  return static_cast<std::uint8_t>(std::min<double>(spec.peak_cost, std::ceil(c - 1e-9)));
}

Grid2 object_layer(const YawPose& pose, const Vec3& size, const AffordanceSpec& spec, const Grid2& grid_template) {
  Grid2 g = Grid2::empty_like(grid_template);
  const double reach = std::max(spec.bounding_radius(), 0.5 * std::hypot(size.x(), size.y())) + g.resolution;
  const int x0 = std::max(0, static_cast<int>(std::floor((pose.x - reach - g.origin.x()) / g.resolution)));
  const int x1 = std::min(g.width - 1, static_cast<int>(std::ceil((pose.x + reach - g.origin.x()) / g.resolution)));
  const int y0 = std::max(0, static_cast<int>(std::floor((pose.y - reach - g.origin.y()) / g.resolution)));
  const int y1 = std::min(g.height - 1, static_cast<int>(std::ceil((pose.y + reach - g.origin.y()) / g.resolution)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 c = g.center(x, y);
      g.at(x, y) = in_footprint(pose, size, c) ? kLethal : affordance_cell_cost(spec, pose, c);
    }
  }
  return g;
}

void merge_into(Grid2& dst, const Grid2& layer) {
  if (!dst.same_geometry(layer)) throw Error("merge: grid geometry mismatch");
  for (std::size_t i = 0; i < dst.cost.size(); ++i) dst.cost[i] = std::max(dst.cost[i], layer.cost[i]);
}

Grid2 merge(const Grid2& background, std::span<const Grid2> layers) {
  Grid2 out = background;
  for (const auto& l : layers) merge_into(out, l);
  return out;
}

void write_pgm(const Grid2& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << grid.width << ' ' << grid.height << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(grid.width));
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) row[x] = static_cast<char>(255 - grid.at(x, y));
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  std::ofstream meta(path.string() + ".txt");
  meta << "resolution " << grid.resolution << "\norigin " << grid.origin.x() << ' ' << grid.origin.y() << "\nwidth "
       << grid.width << "\nheight " << grid.height << "\nencoding 255-cost\n";
}

Grid2 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P5" || maxv != 255 || w <= 0 || h <= 0) throw Error("pgm: unsupported header in " + path.string());
  in.get();
  Grid2 g;
  g.width = w;
  g.height = h;
  g.cost.assign(static_cast<std::size_t>(w) * h, 0);
  std::vector<char> row(static_cast<std::size_t>(w));
  for (int y = h - 1; y >= 0; --y) {
    if (!in.read(row.data(), w)) throw Error("pgm: truncated data");
    for (int x = 0; x < w; ++x) g.at(x, y) = static_cast<std::uint8_t>(255 - static_cast<unsigned char>(row[x]));
  }
  std::ifstream meta(path.string() + ".txt");
  std::string key;
  while (meta >> key) {
    if (key == "resolution") meta >> g.resolution;
    else if (key == "origin") meta >> g.origin.x() >> g.origin.y();
    else meta.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }
  return g;
}

}  // namespace oanav
