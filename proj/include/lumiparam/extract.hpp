#ifndef LUMIPARAM_EXTRACT_HPP
#define LUMIPARAM_EXTRACT_HPP

// Light-source detection in HDR panoramas and conversion of each detected
// region to a parametric light.

#include "lumiparam/core.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <queue>
#include <vector>

namespace lumiparam {

/// One detected source: an 8-connected set of pixels (columns wrap).
struct LightMask {
  std::vector<Pixel> pixels;
  double peak = 0;   // luminance of the seed pixel
  double energy = 0; // sum of luminance x solid angle over the pixels
};

struct DetectOptions {
  double growth_fraction = 1.0 / 3.0; // grow while luminance >= peak x fraction
  double energy_fraction = 0.1;       // keep masks with >= this share of the strongest energy
  int max_lights = 10;
};

struct ExtractOptions {
  DetectOptions detect;
  double fallback_distance = 3.0; // meters, used when no depth is known
  double min_solid_angle = 1e-4;
};

/// Detects light sources by repeated seed-and-grow on unmasked pixels.
/// Masks come back sorted by decreasing energy.
inline std::vector<LightMask> detect_lights(const EnvironmentMap &map, const DetectOptions &opts = {}) {
  const int w = map.width();
  const int h = map.height();
  std::vector<double> lum(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) lum[i] = luminance(map[i]);
  std::vector<char> masked(map.size(), 0);
  std::vector<LightMask> masks;
  double strongest = 0;

  while (static_cast<int>(masks.size()) < opts.max_lights) {
    std::size_t seed = map.size();
    for (std::size_t i = 0; i < map.size(); ++i)
      if (!masked[i] && lum[i] > 0 && (seed == map.size() || lum[i] > lum[seed])) seed = i;
    if (seed == map.size()) break;

    LightMask mask;
    mask.peak = lum[seed];
    const double floor_lum = mask.peak * opts.growth_fraction;
    std::queue<std::size_t> frontier;
    frontier.push(seed);
    masked[seed] = 1;
    while (!frontier.empty()) {
      const std::size_t i = frontier.front();
      frontier.pop();
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      mask.pixels.push_back({x, y});
      mask.energy += lum[i] * pixel_solid_angle(y, w, h);
      for (int dy = -1; dy <= 1; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = (x + dx + w) % w;
          const std::size_t j = map.index(nx, ny);
          if (masked[j] || lum[j] < floor_lum) continue;
          masked[j] = 1;
          frontier.push(j);
        }
      }
    }
    // Pixels of a discarded mask stay marked; detection stops right after.
    if (!masks.empty() && mask.energy < opts.energy_fraction * strongest) break;
    strongest = std::max(strongest, mask.energy);
    masks.push_back(std::move(mask));
  }

  std::stable_sort(masks.begin(), masks.end(), [](const LightMask &a, const LightMask &b) { return a.energy > b.energy; });
  // A later, larger source can make an earlier one insignificant.
  std::erase_if(masks, [&](const LightMask &m) { return m.energy < opts.energy_fraction * strongest; });
  return masks;
}

namespace detail {

/// Orthonormal tangent basis (e1, e2) at unit vector n.
inline std::pair<Vec3, Vec3> tangent_basis(const Vec3 &n) {
  const Vec3 helper = std::abs(n.y) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
  const Vec3 e1 = normalized(cross(helper, n));
  return {e1, cross(n, e1)};
}

} // namespace detail

/// Converts a detected region into a parametric light.
///
/// Direction is the luminance-weighted centroid of the pixel directions.
/// Size comes from an ellipse fit: pixel directions are mapped into the
/// tangent plane at the centroid (azimuthal-equidistant, so offsets are in
/// radians) and the solid-angle-weighted covariance gives half-axes
/// a, b = 2 sqrt(eigenvalue). Their mean theta is reported as the solid angle
/// of a cap with that half-angle.
inline Light estimate_light(const LightMask &mask, const EnvironmentMap &map, const DepthMap *depth = nullptr,
                            const ExtractOptions &opts = {}) {
  if (mask.pixels.empty()) throw std::invalid_argument("estimate_light: empty mask");
  const int w = map.width();
  const int h = map.height();
  for (const Pixel &p : mask.pixels)
    if (p.x < 0 || p.x >= w || p.y < 0 || p.y >= h) throw std::out_of_range("estimate_light: mask pixel outside map");
  if (depth && (depth->width() != w || depth->height() != h))
    throw std::invalid_argument("estimate_light: depth map size differs from the environment map");

  Light light;
  Vec3 centroid;
  Rgb color;
  double area = 0;
  double depth_sum = 0;
  int depth_count = 0;
  for (const Pixel &p : mask.pixels) {
    const Vec3 u = pixel_to_direction(p.x, p.y, w, h);
    const double dw = pixel_solid_angle(p.y, w, h);
    const Rgb &c = map.at(p.x, p.y);
    centroid += u * (luminance(c) * dw);
    color += c * dw;
    area += dw;
    if (depth) {
      const std::size_t i = map.index(p.x, p.y);
      if (depth->known(i)) {
        depth_sum += (*depth)[i];
        ++depth_count;
      }
    }
  }
  if (norm(centroid) > 0) {
    light.direction = normalized(centroid);
  } else {
    // Zero-luminance region; fall back to the geometric centroid.
    Vec3 geo;
    for (const Pixel &p : mask.pixels) geo += pixel_to_direction(p.x, p.y, w, h);
    light.direction = norm(geo) > 0 ? normalized(geo) : pixel_to_direction(mask.pixels[0].x, mask.pixels[0].y, w, h);
  }
  if (mask.pixels.size() == 1) light.direction = pixel_to_direction(mask.pixels[0].x, mask.pixels[0].y, w, h);
  light.color = color * (1.0 / area);
  light.distance = depth_count > 0 ? depth_sum / depth_count : opts.fallback_distance;

  const auto [e1, e2] = detail::tangent_basis(light.direction);
  std::vector<std::array<double, 2>> offsets;
  offsets.reserve(mask.pixels.size());
  double mx = 0, my = 0;
  for (const Pixel &p : mask.pixels) {
    const Vec3 u = pixel_to_direction(p.x, p.y, w, h);
    const double dw = pixel_solid_angle(p.y, w, h);
    const Vec3 t = u - light.direction * dot(u, light.direction);
    const double tn = norm(t);
    const double angle = angle_between(light.direction, u);
    const double ox = tn > 0 ? angle * dot(t, e1) / tn : 0.0;
    const double oy = tn > 0 ? angle * dot(t, e2) / tn : 0.0;
    offsets.push_back({ox, oy});
    mx += ox * dw;
    my += oy * dw;
  }
  mx /= area;
  my /= area;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t k = 0; k < mask.pixels.size(); ++k) {
    const double dw = pixel_solid_angle(mask.pixels[k].y, w, h);
    const double dx = offsets[k][0] - mx;
    const double dy = offsets[k][1] - my;
    sxx += dx * dx * dw;
    syy += dy * dy * dw;
    sxy += dx * dy * dw;
  }
  sxx /= area;
  syy /= area;
  sxy /= area;
  const double tr = 0.5 * (sxx + syy);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
  const double a = 2.0 * std::sqrt(std::max(0.0, tr + disc));
  const double b = 2.0 * std::sqrt(std::max(0.0, tr - disc));
  const double theta = std::min(kPi, 0.5 * (a + b));
  light.solid_angle = std::clamp(2.0 * kPi * (1.0 - std::cos(theta)), opts.min_solid_angle, kFourPi);
  return light;
}

/// Solid-angle-weighted mean RGB over every pixel outside the masks.
inline Rgb estimate_ambient(const EnvironmentMap &map, const std::vector<LightMask> &masks) {
  std::vector<char> in_mask(map.size(), 0);
  for (const LightMask &m : masks)
    for (const Pixel &p : m.pixels) in_mask[map.index(p.x, p.y)] = 1;
  return weighted_mean_rgb(map, [&](std::size_t i) { return !in_mask[i]; });
}

struct Extraction {
  LightSet lights;
  std::vector<LightMask> masks; // one per light, same order
};

inline Extraction extract_with_masks(const EnvironmentMap &map, const DepthMap *depth = nullptr,
                                     const ExtractOptions &opts = {}) {
  Extraction out;
  out.masks = detect_lights(map, opts.detect);
  for (const LightMask &m : out.masks) out.lights.lights.push_back(estimate_light(m, map, depth, opts));
  out.lights.ambient = estimate_ambient(map, out.masks);
  return out;
}

/// Full ground-truth extraction: detection, per-mask parameters and ambient.
inline LightSet extract_lightset(const EnvironmentMap &map, const DepthMap *depth = nullptr,
                                 const ExtractOptions &opts = {}) {
  return extract_with_masks(map, depth, opts).lights;
}

} // namespace lumiparam

#endif // LUMIPARAM_EXTRACT_HPP
