#ifndef LUMIPARAM_OPTIMIZE_HPP
#define LUMIPARAM_OPTIMIZE_HPP

// Training losses, light assignment, intensity refinement and the
// gradient-descent light-set fitter.

#include "lumiparam/adam.hpp"
#include "lumiparam/core.hpp"
#include "lumiparam/extract.hpp"
#include "lumiparam/nnls.hpp"
#include "lumiparam/project.hpp"
#include "lumiparam/render_eval.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace lumiparam {

struct LossConfig {
  double w_r = 20.0;
  double w_a = 1.0;
  double threshold_fraction = 0.05;

  void validate() const {
    if (!(w_r >= 0 && w_a >= 0)) throw std::invalid_argument("LossConfig: weights must be non-negative");
    if (!(threshold_fraction > 0 && threshold_fraction < 1))
      throw std::invalid_argument("LossConfig: threshold_fraction must be in (0, 1)");
  }
};

struct ThresholdResult {
  EnvironmentMap map;
  Rgb ambient;
};

/// Keeps pixels whose luminance is at least fraction x peak; the rest are
/// zeroed and their solid-angle-weighted mean becomes the ambient term.
inline ThresholdResult threshold_ground_truth(const EnvironmentMap &map, double fraction) {
  if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("threshold fraction must be in (0, 1)");
  double peak = 0;
  for (const Rgb &c : map.pixels()) peak = std::max(peak, luminance(c));
  if (!(peak > 0)) throw std::invalid_argument("threshold_ground_truth: map has no positive pixel");
  const double cut = fraction * peak;
  std::vector<char> kept(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) kept[i] = luminance(map[i]) >= cut;
  ThresholdResult out{map, weighted_mean_rgb(map, [&](std::size_t i) { return !kept[i]; })};
  for (std::size_t i = 0; i < map.size(); ++i)
    if (!kept[i]) out.map[i] = {};
  return out;
}

inline LossResult loss_step1(const LightSet &set, const EnvironmentMap &gt_map, const Rgb &gt_ambient,
                             const LossConfig &cfg) {
  cfg.validate();
  return loss_and_gradients(set, gt_map, gt_ambient, cfg.w_r, cfg.w_a);
}

// ---------------------------------------------------------------------------
// Assignment and the per-parameter loss

inline constexpr double kAssignmentCutoffDegrees = 45.0;

struct Assignment {
  struct Match {
    std::size_t predicted;
    std::size_t ground_truth;
    double degrees;
  };
  std::vector<Match> pairs;
  std::vector<std::size_t> unmatched;
};

/// Nearest ground-truth light by angle for every prediction; matches beyond
/// 45 degrees are dropped. Many-to-one matches are allowed and ties go to the
/// lowest ground-truth index.
inline Assignment assign_lights(const LightSet &predicted, const LightSet &gt) {
  // Absorbs rounding in the angle so 45.0 exactly stays inside.
  constexpr double slack = 1e-9;
  Assignment out;
  for (std::size_t p = 0; p < predicted.lights.size(); ++p) {
    std::size_t best = gt.lights.size();
    double best_deg = 0;
    for (std::size_t g = 0; g < gt.lights.size(); ++g) {
      const double deg = degrees(angle_between(predicted.lights[p].direction, gt.lights[g].direction));
      if (best == gt.lights.size() || deg < best_deg) best = g, best_deg = deg;
    }
    if (best < gt.lights.size() && best_deg <= kAssignmentCutoffDegrees + slack)
      out.pairs.push_back({p, best, best_deg});
    else
      out.unmatched.push_back(p);
  }
  return out;
}

struct Step2Options {
  /// Adds ell2(l_hat, l) for matched pairs. The refinement stage keeps
  /// directions frozen; assignment training from scratch needs this term.
  bool penalize_direction = false;
};

struct Step2Result {
  double loss = 0;
  ProjectionJacobian gradient;
  Assignment assignment;
};

namespace detail {

inline double mean_sq(const Rgb &d) { return (d.r * d.r + d.g * d.g + d.b * d.b) / 3.0; }
inline double mean_sq(const Vec3 &d) { return dot(d, d) / 3.0; }

} // namespace detail

/// ell2(a, a_hat) + sum over matched pairs of ell2(d) + ell2(s) + ell2(c), each
/// ell2 being the mean squared difference over components.
inline Step2Result loss_step2_with_gradients(const LightSet &predicted, const LightSet &gt,
                                             const Step2Options &opts = {}) {
  Step2Result out;
  out.assignment = assign_lights(predicted, gt);
  out.gradient.lights.assign(predicted.lights.size(), {});
  const Rgb da = predicted.ambient - gt.ambient;
  out.loss = detail::mean_sq(da);
  out.gradient.ambient = da * (2.0 / 3.0);
  for (const auto &m : out.assignment.pairs) {
    const Light &p = predicted.lights[m.predicted];
    const Light &g = gt.lights[m.ground_truth];
    LightGradient &grad = out.gradient.lights[m.predicted];
    const double dd = p.distance - g.distance;
    const double ds = p.solid_angle - g.solid_angle;
    const Rgb dc = p.color - g.color;
    out.loss += dd * dd + ds * ds + detail::mean_sq(dc);
    grad.distance += 2.0 * dd;
    grad.solid_angle += 2.0 * ds;
    grad.color += dc * (2.0 / 3.0);
    if (opts.penalize_direction) {
      const Vec3 dl = p.direction - g.direction;
      out.loss += detail::mean_sq(dl);
      const Vec3 raw = dl * (2.0 / 3.0);
      grad.direction += raw - p.direction * dot(raw, p.direction);
    }
  }
  return out;
}

inline double loss_step2(const LightSet &predicted, const LightSet &gt) {
  return loss_step2_with_gradients(predicted, gt).loss;
}

// ---------------------------------------------------------------------------
// Intensity refinement

struct RefineResult {
  LightSet lights;
  std::vector<Rgb> scale; // per light, per channel
  std::vector<std::string> warnings;
};

inline constexpr int kRefineProbeResolution = 32;

/// Rescales light colors so the diffuse renders of the parametric lights best
/// match (per channel, non-negative least squares) the render of the ground
/// truth masked to the detected light pixels.
inline RefineResult refine_intensities(const LightSet &set, const EnvironmentMap &gt_map,
                                       const std::vector<LightMask> &masks,
                                       int resolution = kRefineProbeResolution) {
  if (masks.size() != set.lights.size()) throw std::invalid_argument("refine_intensities: need one mask per light");
  const std::size_t n = set.lights.size();
  RefineResult out;
  out.lights = set;
  out.scale.assign(n, Rgb{0, 0, 0});
  if (n == 0) return out;

  // Masks are disjoint, so the sum of per-mask renders is one render of the union.
  EnvironmentMap masked(gt_map.width(), gt_map.height());
  for (const LightMask &m : masks)
    for (const Pixel &p : m.pixels) masked.at(p.x, p.y) = gt_map.at(p.x, p.y);
  const ProbeImage target = render_sphere(masked, resolution);

  std::vector<ProbeImage> renders;
  renders.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LightSet single;
    single.lights.push_back(set.lights[i]);
    renders.push_back(render_sphere(single, resolution));
  }

  std::vector<std::size_t> fg;
  for (std::size_t k = 0; k < target.size(); ++k)
    if (target.foreground(k)) fg.push_back(k);

  std::vector<bool> dark(n, true);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k : fg)
      if (!renders[i][k].is_zero()) {
        dark[i] = false;
        break;
      }
  for (std::size_t i = 0; i < n; ++i)
    if (dark[i] && !set.lights[i].is_off())
      out.warnings.push_back("light " + std::to_string(i) + " renders to zero; its scale is forced to 0");

  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> A(fg.size() * n), b(fg.size());
    for (std::size_t r = 0; r < fg.size(); ++r) {
      b[r] = target[fg[r]][ch];
      for (std::size_t i = 0; i < n; ++i) A[r * n + i] = dark[i] ? 0.0 : renders[i][fg[r]][ch];
    }
    const NnlsResult sol = nnls_projected_gradient(A, b, n);
    for (std::size_t i = 0; i < n; ++i) out.scale[i][ch] = dark[i] ? 0.0 : sol.x[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rgb &c = out.lights.lights[i].color;
    for (int ch = 0; ch < 3; ++ch) c[ch] *= out.scale[i][ch];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

struct FitOptions {
  int iterations = 500;
  double learning_rate = 1e-3;
  int lr_half_life = 100; // iterations between learning-rate halvings
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations <= 0) throw std::invalid_argument("FitOptions: iterations must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("FitOptions: learning rate must be positive");
    if (lr_half_life <= 0) throw std::invalid_argument("FitOptions: lr half-life must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw std::invalid_argument("FitOptions: betas must be in [0, 1)");
  }
};

inline constexpr double kInitialSolidAngle = 0.3;
inline constexpr double kInitialDistance = 3.0;
inline constexpr double kMinSolidAngle = 1e-4;

/// Uniform directions on the sphere from a seeded 64-bit Mersenne Twister.
/// The double conversion is spelled out so results match on every platform.
class SphereSampler {
public:
  explicit SphereSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  Vec3 direction() {
    const double z = 1.0 - 2.0 * uniform();
    const double phi = 2.0 * kPi * uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

private:
  std::mt19937_64 rng_;
};

/// n lights with seeded uniform directions, s = 0.3 sr, c = (1, 1, 1), d = 3 m.
inline LightSet initial_lightset(std::size_t n, std::uint64_t seed, const Rgb &ambient) {
  SphereSampler sampler(seed);
  LightSet set;
  set.ambient = ambient;
  for (std::size_t i = 0; i < n; ++i)
    set.lights.push_back({sampler.direction(), kInitialDistance, kInitialSolidAngle, {1, 1, 1}});
  return set;
}

struct FitResult {
  LightSet lights;
  std::vector<double> trace; // loss before each update
  double initial_loss = 0;
  double final_loss = 0;
};

/// Which parameter groups the optimizer may change.
struct FreeParameters {
  bool direction = true;
  bool distance = false;
  bool solid_angle = true;
  bool color = true;
  bool ambient = true;
};

using LossFunction = std::function<std::pair<double, ProjectionJacobian>(const LightSet &)>;

/// Runs the moment-based optimizer on `start`. After every update directions
/// are renormalized, solid angles clamped to [1e-4, 4 pi], colors and ambient
/// to >= 0 and distances to >= 1 mm. The learning rate halves every
/// opts.lr_half_life iterations.
inline FitResult run_optimizer(LightSet start, const LossFunction &loss_fn, const FitOptions &opts,
                               const FreeParameters &free = {}) {
  opts.validate();
  constexpr std::size_t kPerLight = 8; // l xyz, d, s, c rgb
  const std::size_t n = start.lights.size();
  const std::size_t size = kPerLight * n + 3;
  std::vector<double> params(size), grad(size);

  auto pack = [&](const LightSet &set) {
    for (std::size_t i = 0; i < n; ++i) {
      const Light &l = set.lights[i];
      double *p = params.data() + kPerLight * i;
      p[0] = l.direction.x, p[1] = l.direction.y, p[2] = l.direction.z;
      p[3] = l.distance, p[4] = std::log(l.solid_angle);
      p[5] = l.color.r, p[6] = l.color.g, p[7] = l.color.b;
    }
    double *a = params.data() + kPerLight * n;
    a[0] = set.ambient.r, a[1] = set.ambient.g, a[2] = set.ambient.b;
  };
  auto unpack = [&](LightSet &set) {
    for (std::size_t i = 0; i < n; ++i) {
      Light &l = set.lights[i];
      double *p = params.data() + kPerLight * i;
      const Vec3 dir{p[0], p[1], p[2]};
      l.direction = norm(dir) > 0 ? normalized(dir) : l.direction;
      l.distance = std::max(1e-3, p[3]);
      l.solid_angle = std::clamp(std::exp(p[4]), kMinSolidAngle, kFourPi);
      l.color = {std::max(0.0, p[5]), std::max(0.0, p[6]), std::max(0.0, p[7])};
      p[0] = l.direction.x, p[1] = l.direction.y, p[2] = l.direction.z;
      p[3] = l.distance, p[4] = std::log(l.solid_angle);
      p[5] = l.color.r, p[6] = l.color.g, p[7] = l.color.b;
    }
    double *a = params.data() + kPerLight * n;
    set.ambient = {std::max(0.0, a[0]), std::max(0.0, a[1]), std::max(0.0, a[2])};
    a[0] = set.ambient.r, a[1] = set.ambient.g, a[2] = set.ambient.b;
  };
  auto flatten = [&](const ProjectionJacobian &g, const LightSet &set) {
    for (std::size_t i = 0; i < n; ++i) {
      const LightGradient &lg = g.lights[i];
      double *p = grad.data() + kPerLight * i;
      p[0] = free.direction ? lg.direction.x : 0.0;
      p[1] = free.direction ? lg.direction.y : 0.0;
      p[2] = free.direction ? lg.direction.z : 0.0;
      p[3] = free.distance ? lg.distance : 0.0;
      p[4] = free.solid_angle ? lg.solid_angle * set.lights[i].solid_angle : 0.0;
      p[5] = free.color ? lg.color.r : 0.0;
      p[6] = free.color ? lg.color.g : 0.0;
      p[7] = free.color ? lg.color.b : 0.0;
    }
    double *a = grad.data() + kPerLight * n;
    a[0] = free.ambient ? g.ambient.r : 0.0;
    a[1] = free.ambient ? g.ambient.g : 0.0;
    a[2] = free.ambient ? g.ambient.b : 0.0;
  };

  FitResult out;
  out.lights = std::move(start);
  pack(out.lights);
  Adam adam(size, {opts.learning_rate, opts.beta1, opts.beta2, opts.epsilon});
  out.trace.reserve(opts.iterations);
  for (int it = 0; it < opts.iterations; ++it) {
    const auto [loss, g] = loss_fn(out.lights);
    out.trace.push_back(loss);
    flatten(g, out.lights);
    const double lr = opts.learning_rate * std::pow(0.5, static_cast<double>(it / opts.lr_half_life));
    adam.step(params, grad, lr);
    unpack(out.lights);
  }
  out.initial_loss = out.trace.front();
  out.final_loss = loss_fn(out.lights).first;
  return out;
}

/// Fits n lights to a panorama with the environment-map loss: the target is
/// thresholded first, then directions, sizes, colors and ambient are
/// optimized from a seeded initialization. Distances keep their initial value.
inline FitResult fit_lightset(const EnvironmentMap &target, std::size_t n, const LossConfig &cfg = {},
                              const FitOptions &opts = {}) {
  cfg.validate();
  opts.validate();
  if (n == 0) throw std::invalid_argument("fit_lightset: need at least one light");
  const ThresholdResult gt = threshold_ground_truth(target, cfg.threshold_fraction);
  LightSet start = initial_lightset(n, opts.seed, gt.ambient);
  const LossFunction loss = [&](const LightSet &set) {
    LossResult r = loss_step1(set, gt.map, gt.ambient, cfg);
    return std::pair{r.loss, std::move(r.gradient)};
  };
  return run_optimizer(std::move(start), loss, opts);
}

/// Optimizes a light set against ground-truth lights with the
/// assignment-based loss. With default options directions stay fixed, as in
/// the refinement stage; `penalize_direction` trains every parameter.
inline FitResult fit_by_assignment(LightSet start, const LightSet &gt, const FitOptions &opts,
                                   const Step2Options &step2 = {}) {
  const LossFunction loss = [&](const LightSet &set) {
    Step2Result r = loss_step2_with_gradients(set, gt, step2);
    return std::pair{r.loss, std::move(r.gradient)};
  };
  FreeParameters free;
  free.direction = step2.penalize_direction;
  free.distance = true;
  return run_optimizer(std::move(start), loss, opts, free);
}

} // namespace lumiparam

#endif // LUMIPARAM_OPTIMIZE_HPP
