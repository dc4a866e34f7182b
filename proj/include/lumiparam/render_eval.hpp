#ifndef LUMIPARAM_RENDER_EVAL_HPP
#define LUMIPARAM_RENDER_EVAL_HPP

// Diffuse light-probe renders and the RMSE / si-RMSE metrics.

#include "lumiparam/core.hpp"
#include "lumiparam/parallel.hpp"
#include "lumiparam/project.hpp"
#include "lumiparam/spatial.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace lumiparam {

/// Map size used to project light sets before integrating them.
inline constexpr int kProbeProjectionWidth = 128;
inline constexpr int kProbeProjectionHeight = 64;

/// Square render of a unit-albedo diffuse sphere. Background pixels (outside
/// the silhouette) are zero and excluded from every metric.
class ProbeImage : public Grid<Rgb> {
public:
  explicit ProbeImage(int resolution) : Grid(resolution, resolution), foreground_(size(), 0) {}

  [[nodiscard]] int resolution() const { return width_; }
  [[nodiscard]] bool foreground(std::size_t i) const { return foreground_[i] != 0; }
  void set_foreground(std::size_t i, bool on) { foreground_[i] = on ? 1 : 0; }
  [[nodiscard]] std::size_t foreground_count() const {
    std::size_t n = 0;
    for (char c : foreground_) n += c ? 1 : 0;
    return n;
  }

private:
  std::vector<char> foreground_;
};

/// E(n) = sum over pixels of L(u) max(0, n . u) dw.
inline Rgb irradiance(const EnvironmentMap &map, const Vec3 &n) {
  const auto grid = sphere_grid(map.width(), map.height());
  Rgb e;
  for (int y = 0; y < map.height(); ++y) {
    Rgb row;
    for (int x = 0; x < map.width(); ++x) {
      const double c = dot(n, grid->direction(x, y));
      if (c > 0) row += map.at(x, y) * c;
    }
    e += row * grid->solid_angle_of_row(y);
  }
  return e;
}

/// Normal at probe pixel (i, j), or nothing for background pixels. The
/// camera sits on +Z looking down -Z.
inline std::optional<Vec3> probe_normal(int i, int j, int resolution) {
  const double px = 2.0 * (i + 0.5) / resolution - 1.0;
  const double py = 1.0 - 2.0 * (j + 0.5) / resolution;
  const double r2 = px * px + py * py;
  if (r2 > 1.0) return std::nullopt;
  return Vec3{px, py, std::sqrt(1.0 - r2)};
}

inline ProbeImage render_sphere(const EnvironmentMap &map, int resolution) {
  if (resolution < 16) throw std::invalid_argument("render_sphere: resolution must be at least 16");
  ProbeImage probe(resolution);
  parallel_for(0, resolution, [&](int j) {
    for (int i = 0; i < resolution; ++i) {
      const auto n = probe_normal(i, j, resolution);
      if (!n) continue;
      const std::size_t k = probe.index(i, j);
      probe.set_foreground(k, true);
      probe[k] = irradiance(map, *n) * (1.0 / kPi);
    }
  }, 1);
  return probe;
}

/// Light sets are projected (ambient included) at 64x128 and then rendered
/// through the same integration path as environment maps.
inline ProbeImage render_sphere(const LightSet &set, int resolution) {
  return render_sphere(project_lightset(set, kProbeProjectionWidth, kProbeProjectionHeight, true), resolution);
}

namespace detail {

inline void check_same_probe(const ProbeImage &a, const ProbeImage &b) {
  if (a.resolution() != b.resolution()) throw std::invalid_argument("probe resolutions differ");
}

/// Sum over foreground pixels and channels of (alpha a - b)^2, and the count.
inline std::pair<double, std::size_t> scaled_sq_error(const ProbeImage &a, const ProbeImage &b, double alpha) {
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.foreground(i)) continue;
    for (int k = 0; k < 3; ++k) {
      const double d = alpha * a[i][k] - b[i][k];
      sum += d * d;
    }
    count += 3;
  }
  return {sum, count};
}

} // namespace detail

inline double rmse(const ProbeImage &a, const ProbeImage &b) {
  detail::check_same_probe(a, b);
  const auto [sum, count] = detail::scaled_sq_error(a, b, 1.0);
  return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

/// Least-squares scale alpha* = sum(a b) / sum(a a) over foreground pixels and
/// channels jointly. Returns 0 for an all-zero `a`.
inline double optimal_scale(const ProbeImage &a, const ProbeImage &b) {
  detail::check_same_probe(a, b);
  double ab = 0, aa = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.foreground(i)) continue;
    for (int k = 0; k < 3; ++k) {
      ab += a[i][k] * b[i][k];
      aa += a[i][k] * a[i][k];
    }
  }
  return aa > 0 ? ab / aa : 0.0;
}

/// rmse(alpha* a, b). Throws when `a` is identically zero on the foreground.
inline double si_rmse(const ProbeImage &a, const ProbeImage &b) {
  detail::check_same_probe(a, b);
  bool any = false;
  for (std::size_t i = 0; i < a.size() && !any; ++i)
    any = a.foreground(i) && !a[i].is_zero();
  if (!any) throw std::invalid_argument("si_rmse: prediction is identically zero");
  const auto [sum, count] = detail::scaled_sq_error(a, b, optimal_scale(a, b));
  return std::sqrt(sum / static_cast<double>(count));
}

struct EvalEntry {
  Translation offset;
  double rmse = 0;
  double si_rmse = 0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;
};

inline std::vector<Translation> default_offsets() { return {{0, 0, 0}, {-1, 0, 0}, {1, 0, 0}}; }

inline constexpr int kDefaultProbeResolution = 64;

/// Renders both representations at every offset and scores the prediction.
/// An all-zero prediction gets si-RMSE = rmse(0, b), the infimum over scales.
inline EvalReport evaluate_at_positions(const LightSet &predicted, const EnvironmentMap &gt_map,
                                        const DepthMap &gt_depth,
                                        const std::vector<Translation> &offsets = default_offsets(),
                                        int resolution = kDefaultProbeResolution) {
  if (offsets.empty()) throw std::invalid_argument("evaluate_at_positions: no offsets");
  EvalReport report;
  for (const Translation &t : offsets) {
    const ProbeImage gt = render_sphere(warp_envmap(gt_map, gt_depth, t), resolution);
    const ProbeImage pred = render_sphere(relocate_lightset(predicted, t), resolution);
    EvalEntry e;
    e.offset = t;
    e.rmse = rmse(pred, gt);
    const auto [sum, count] = detail::scaled_sq_error(pred, gt, optimal_scale(pred, gt));
    e.si_rmse = std::min(e.rmse, std::sqrt(sum / static_cast<double>(count)));
    report.entries.push_back(e);
  }
  return report;
}

} // namespace lumiparam

#endif // LUMIPARAM_RENDER_EVAL_HPP
