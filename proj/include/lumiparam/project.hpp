#ifndef LUMIPARAM_PROJECT_HPP
#define LUMIPARAM_PROJECT_HPP

// Differentiable mapping from a parametric light set to an environment map.
// Each light becomes a spherical gaussian c exp((l . u - 1) / kappa) whose
// bandwidth is set so the lobe drops to 10% of its peak at the angular
// radius of a cap of solid angle s.

#include "lumiparam/core.hpp"
#include "lumiparam/parallel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace lumiparam {

/// kappa = s / (2 pi ln 10), so exp((cos theta_s - 1) / kappa) = 0.1 where
/// theta_s = arccos(1 - s / 2 pi).
inline double gaussian_bandwidth(double solid_angle) {
  if (!(solid_angle > 0)) throw std::invalid_argument("gaussian_bandwidth: solid angle must be positive");
  return solid_angle / (2.0 * kPi * std::numbers::ln10);
}

/// Gaussian lobe value for a light at cos-angle l . u.
inline double gaussian_kernel(double cos_angle, double kappa) { return std::exp((cos_angle - 1.0) / kappa); }

/// Projects a light set onto a width x height map. Distances are ignored.
inline EnvironmentMap project_lightset(const LightSet &set, int width, int height, bool include_ambient) {
  EnvironmentMap out(width, height);
  const auto grid = sphere_grid(width, height);
  std::vector<double> kappa;
  for (const Light &l : set.lights) kappa.push_back(gaussian_bandwidth(l.solid_angle));
  parallel_for(0, height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 &u = grid->direction(x, y);
      Rgb v = include_ambient ? set.ambient : Rgb{};
      for (std::size_t i = 0; i < set.lights.size(); ++i) {
        const Light &l = set.lights[i];
        v += l.color * gaussian_kernel(dot(l.direction, u), kappa[i]);
      }
      out.at(x, y) = v;
    }
  });
  return out;
}

/// Partial derivatives of a scalar loss with respect to every parameter.
struct LightGradient {
  Vec3 direction; // tangent to the unit sphere at the light direction
  double distance = 0;
  double solid_angle = 0;
  Rgb color;
};

struct ProjectionJacobian {
  std::vector<LightGradient> lights;
  Rgb ambient;
};

struct LossResult {
  double loss = 0;
  double render_term = 0;  // unweighted solid-angle mean of (f - R)^2
  double ambient_term = 0; // unweighted mean of (a_hat - a)^2
  ProjectionJacobian gradient;
};

/// loss = w_r mean_{pixels, channels}((f - R)^2) + w_a mean_{channels}((a_hat - a)^2).
///
/// The pixel mean is solid-angle weighted (sum of dw (f - R)^2 / (3 * 4 pi)),
/// and f excludes the ambient term. Rows are reduced in index order, so
/// results do not depend on the thread count.
inline LossResult loss_and_gradients(const LightSet &set, const EnvironmentMap &target, const Rgb &target_ambient,
                                     double w_r, double w_a) {
  if (!(w_r >= 0 && w_a >= 0)) throw std::invalid_argument("loss weights must be non-negative");
  const int width = target.width();
  const int height = target.height();
  const auto grid = sphere_grid(width, height);
  const std::size_t n = set.lights.size();
  std::vector<double> kappa(n);
  for (std::size_t i = 0; i < n; ++i) kappa[i] = gaussian_bandwidth(set.lights[i].solid_angle);

  // Per row: loss term followed by 7 accumulators per light (l xyz, s, c rgb).
  const std::size_t stride = 1 + 7 * n;
  std::vector<double> rows(static_cast<std::size_t>(height) * stride, 0.0);
  const double norm_weight = 1.0 / (3.0 * kFourPi);

  parallel_for(0, height, [&](int y) {
    double *acc = rows.data() + static_cast<std::size_t>(y) * stride;
    const double weight = grid->solid_angle_of_row(y) * norm_weight;
    std::vector<double> g(n), cosang(n);
    for (int x = 0; x < width; ++x) {
      const Vec3 &u = grid->direction(x, y);
      Rgb f;
      for (std::size_t i = 0; i < n; ++i) {
        cosang[i] = dot(set.lights[i].direction, u);
        g[i] = gaussian_kernel(cosang[i], kappa[i]);
        f += set.lights[i].color * g[i];
      }
      const Rgb r = f - target.at(x, y);
      acc[0] += (r.r * r.r + r.g * r.g + r.b * r.b) * weight;
      const Rgb dldf = r * (2.0 * w_r * weight);
      for (std::size_t i = 0; i < n; ++i) {
        if (g[i] == 0) continue;
        const Light &l = set.lights[i];
        double *a = acc + 1 + 7 * i;
        const double proj = dldf.r * l.color.r + dldf.g * l.color.g + dldf.b * l.color.b;
        const double dg_dcos = g[i] / kappa[i];
        a[0] += proj * dg_dcos * u.x;
        a[1] += proj * dg_dcos * u.y;
        a[2] += proj * dg_dcos * u.z;
        // d g / d s = -g (l.u - 1) / (kappa s)
        a[3] += proj * (-g[i] * (cosang[i] - 1.0) / (kappa[i] * l.solid_angle));
        a[4] += dldf.r * g[i];
        a[5] += dldf.g * g[i];
        a[6] += dldf.b * g[i];
      }
    }
  });

  LossResult out;
  std::vector<double> total(stride, 0.0);
  for (int y = 0; y < height; ++y)
    for (std::size_t k = 0; k < stride; ++k) total[k] += rows[static_cast<std::size_t>(y) * stride + k];

  out.render_term = total[0];
  const Rgb da = set.ambient - target_ambient;
  out.ambient_term = (da.r * da.r + da.g * da.g + da.b * da.b) / 3.0;
  out.loss = w_r * out.render_term + w_a * out.ambient_term;

  out.gradient.lights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double *a = total.data() + 1 + 7 * i;
    const Vec3 &l = set.lights[i].direction;
    const Vec3 raw{a[0], a[1], a[2]};
    LightGradient &gi = out.gradient.lights[i];
    gi.direction = raw - l * dot(raw, l);
    gi.solid_angle = a[3];
    gi.color = {a[4], a[5], a[6]};
  }
  out.gradient.ambient = da * (2.0 * w_a / 3.0);
  return out;
}

} // namespace lumiparam

#endif // LUMIPARAM_PROJECT_HPP
