#ifndef LUMIPARAM_SPATIAL_HPP
#define LUMIPARAM_SPATIAL_HPP

// Moving the observer: parametric relocation, depth-based panorama warping,
// and rectilinear crops.

#include "lumiparam/core.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lumiparam {

/// Displacement of the new observer from the capture point, in meters.
using Translation = Vec3;

inline Vec3 light_world_position(const Light &light) { return light.direction * light.distance; }

/// Re-expresses every light from an observer at t. Solid angles follow the
/// constant-area model s' = s (d / d')^2; color and ambient are unchanged.
inline LightSet relocate_lightset(const LightSet &set, const Translation &t) {
  LightSet out;
  out.ambient = set.ambient;
  for (std::size_t i = 0; i < set.lights.size(); ++i) {
    const Light &l = set.lights[i];
    if (t == Vec3{}) {
      out.lights.push_back(l);
      continue;
    }
    const Vec3 q = light_world_position(l) - t;
    const double dist = norm(q);
    if (!(dist > 1e-6)) throw std::invalid_argument("relocate_lightset: observer coincides with light " + std::to_string(i));
    Light moved = l;
    moved.direction = q * (1.0 / dist);
    moved.distance = dist;
    const double ratio = l.distance / dist;
    moved.solid_angle = std::min(kFourPi, l.solid_angle * ratio * ratio);
    out.lights.push_back(moved);
  }
  return out;
}

namespace detail {

/// Copy of the depth map with unknown pixels replaced by the nearest known
/// depth along their row (columns wrap). Rows with no known depth take the
/// nearest row that has one, same column.
inline std::vector<double> fill_unknown_depth(const DepthMap &depth) {
  const int w = depth.width();
  const int h = depth.height();
  std::vector<double> out(depth.pixels().begin(), depth.pixels().end());
  std::vector<char> row_known(h, 0);
  for (int y = 0; y < h; ++y) {
    double *row = out.data() + static_cast<std::size_t>(y) * w;
    std::vector<int> known;
    for (int x = 0; x < w; ++x)
      if (row[x] > 0) known.push_back(x);
    if (known.empty()) continue;
    row_known[y] = 1;
    if (static_cast<int>(known.size()) == w) continue;
    const std::vector<double> src(row, row + w);
    for (int x = 0; x < w; ++x) {
      if (src[x] > 0) continue;
      int best = -1, best_dist = w + 1;
      for (int k : known) {
        const int d = std::min(std::abs(k - x), w - std::abs(k - x));
        if (d < best_dist) best_dist = d, best = k;
      }
      row[x] = src[best];
    }
  }
  for (int y = 0; y < h; ++y) {
    if (row_known[y]) continue;
    for (int dy = 1; dy < h; ++dy) {
      const int cand[2] = {y - dy, y + dy};
      int src_row = -1;
      for (int c : cand)
        if (c >= 0 && c < h && row_known[c]) {
          src_row = c;
          break;
        }
      if (src_row < 0) continue;
      std::copy_n(out.data() + static_cast<std::size_t>(src_row) * w, w, out.data() + static_cast<std::size_t>(y) * w);
      break;
    }
  }
  return out;
}

} // namespace detail

/// Minimum fraction of known depths warp_envmap accepts.
inline constexpr double kMinKnownDepthFraction = 0.99;

/// Forward-warps a panorama to an observer displaced by t.
///
/// Every source pixel becomes the world point depth x u, which is splatted
/// into the destination pixel seen from t. The nearest point wins each
/// destination pixel (ties keep the earlier source pixel in row-major order).
/// Holes are then dilated: each pass fills every hole touching a filled pixel
/// with the neighbor whose splatted direction is angularly closest to the
/// hole's center, until nothing is left. Radiance is copied, never blended.
inline EnvironmentMap warp_envmap(const EnvironmentMap &map, const DepthMap &depth, const Translation &t) {
  const int w = map.width();
  const int h = map.height();
  if (depth.width() != w || depth.height() != h) throw std::invalid_argument("warp_envmap: depth map size mismatch");
  const std::size_t known = depth.known_count();
  if (known == 0) throw std::invalid_argument("warp_envmap: depth map has no known depth");
  if (static_cast<double>(known) < kMinKnownDepthFraction * static_cast<double>(depth.size()))
    throw std::invalid_argument("warp_envmap: fewer than 99% of depths are known");
  if (t == Vec3{}) return map;

  const auto grid = sphere_grid(w, h);
  const std::vector<double> dist = detail::fill_unknown_depth(depth);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> zbuf(map.size(), inf);
  std::vector<Vec3> sample_dir(map.size());
  std::vector<Rgb> value(map.size());

  for (std::size_t i = 0; i < map.size(); ++i) {
    const Vec3 q = grid->direction(i) * dist[i] - t;
    const double d = norm(q);
    if (!(d > 0)) continue;
    const Vec3 dir = q * (1.0 / d);
    const Pixel p = direction_to_pixel(dir, w, h);
    const std::size_t j = map.index(p.x, p.y);
    if (d < zbuf[j]) {
      zbuf[j] = d;
      sample_dir[j] = dir;
      value[j] = map[i];
    }
  }

  std::vector<char> filled(map.size());
  std::size_t holes = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    filled[i] = zbuf[i] < inf;
    holes += filled[i] ? 0 : 1;
  }
  while (holes > 0) {
    std::vector<std::size_t> newly;
    std::vector<std::size_t> source;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = map.index(x, y);
        if (filled[i]) continue;
        const Vec3 &center = grid->direction(i);
        std::size_t best = map.size();
        double best_cos = -2;
        for (int dy = -1; dy <= 1; ++dy) {
          const int ny = y + dy;
          if (ny < 0 || ny >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const std::size_t j = map.index((x + dx + w) % w, ny);
            if (!filled[j]) continue;
            const double c = dot(sample_dir[j], center);
            if (c > best_cos) best_cos = c, best = j;
          }
        }
        if (best == map.size()) continue;
        newly.push_back(i);
        source.push_back(best);
      }
    }
    if (newly.empty()) break; // unreachable for a non-empty splat
    for (std::size_t k = 0; k < newly.size(); ++k) {
      sample_dir[newly[k]] = sample_dir[source[k]];
      value[newly[k]] = value[source[k]];
      filled[newly[k]] = 1;
    }
    holes -= newly.size();
  }
  return EnvironmentMap(w, h, std::move(value));
}

/// Rectilinear view extracted from a panorama.
class CropImage : public Grid<Rgb> {
public:
  CropImage(int width, int height, double fov_degrees) : Grid(width, height), fov_degrees_(fov_degrees) {
    if (!(fov_degrees > 0 && fov_degrees < 180)) throw std::invalid_argument("crop field of view must be in (0, 180)");
  }
  [[nodiscard]] double fov_degrees() const { return fov_degrees_; }

private:
  double fov_degrees_;
};

/// Camera frame for a crop centered at (azimuth, elevation), degrees.
struct CropCamera {
  Vec3 forward, right, up;
  double half_extent; // tan(fov / 2)
  int width, height;

  CropCamera(double azimuth, double elevation, double fov, int w, int h) : width(w), height(h) {
    if (!(fov > 0 && fov < 180)) throw std::invalid_argument("crop field of view must be in (0, 180)");
    if (w <= 0 || h <= 0) throw std::invalid_argument("crop size must be positive");
    const double az = radians(azimuth);
    const double el = radians(elevation);
    forward = {std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
    right = {std::cos(az), 0.0, -std::sin(az)};
    up = cross(forward, right);
    half_extent = std::tan(radians(fov) / 2.0);
  }

  /// Direction through pixel coordinates (i, j); (width/2, height/2) is the
  /// optical axis and pixels are square.
  [[nodiscard]] Vec3 direction(double i, double j) const {
    const double scale = 2.0 * half_extent / width;
    const double px = (i - width / 2.0) * scale;
    const double py = (height / 2.0 - j) * scale;
    return normalized(forward + right * px + up * py);
  }
};

/// Gnomonic crop with nearest-neighbor sampling. fov is horizontal.
inline CropImage crop_view(const EnvironmentMap &map, double azimuth, double elevation, double fov, int width,
                           int height) {
  const CropCamera cam(azimuth, elevation, fov, width, height);
  CropImage crop(width, height, fov);
  for (int j = 0; j < height; ++j)
    for (int i = 0; i < width; ++i) {
      const Pixel p = direction_to_pixel(cam.direction(i, j), map.width(), map.height());
      crop.at(i, j) = map.at(p.x, p.y);
    }
  return crop;
}

} // namespace lumiparam

#endif // LUMIPARAM_SPATIAL_HPP
