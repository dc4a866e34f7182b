#include "support.hpp"

#include <gtest/gtest.h>

using namespace lumiparam;
using namespace lumiparam::testing;

TEST(GaussianBandwidth, TenPercentAtCapRadius) {
  const double s = 2.0 * kPi * (1.0 - std::cos(radians(30)));
  EXPECT_NEAR(s, 0.8418, 1e-4);
  EXPECT_NEAR(gaussian_kernel(std::cos(radians(30)), gaussian_bandwidth(s)), 0.1, 1e-12);
}

TEST(GaussianBandwidth, HemisphereValue) { EXPECT_NEAR(gaussian_bandwidth(2.0 * kPi), 1.0 / std::log(10.0), 1e-15); }

TEST(GaussianBandwidth, LinearInSolidAngle) {
  for (double s : {1e-4, 0.01, 0.3, 2.0, 12.0}) EXPECT_DOUBLE_EQ(gaussian_bandwidth(2 * s), 2 * gaussian_bandwidth(s));
}

TEST(GaussianBandwidth, NonPositiveThrows) {
  EXPECT_THROW(gaussian_bandwidth(0), std::invalid_argument);
  EXPECT_THROW(gaussian_bandwidth(-1), std::invalid_argument);
}

TEST(ProjectLightSet, PeakValueNearLightDirection) {
  LightSet set;
  set.lights.push_back({{0, 0, 1}, 1, 0.1, {2, 2, 2}});
  const EnvironmentMap map = project_lightset(set, 128, 64, false);
  const Pixel p = direction_to_pixel({0, 0, 1}, 128, 64);
  const Vec3 u = pixel_to_direction(p.x, p.y, 128, 64);
  const double expected = 2.0 * std::exp((u.z - 1.0) / gaussian_bandwidth(0.1));
  EXPECT_NEAR(map.at(p.x, p.y).r, expected, 1e-12);
  EXPECT_GT(map.at(p.x, p.y).r, 1.8);
}

TEST(ProjectLightSet, AmbientOnly) {
  LightSet set;
  set.ambient = {0.3, 0.3, 0.3};
  const EnvironmentMap on = project_lightset(set, 32, 16, true);
  for (const Rgb &c : on.pixels()) EXPECT_EQ(c, set.ambient);
  const EnvironmentMap off = project_lightset(set, 32, 16, false);
  for (const Rgb &c : off.pixels()) EXPECT_TRUE(c.is_zero());
}

TEST(ProjectLightSet, LinearInColor) {
  const Vec3 l = normalized(Vec3{0.3, -0.2, 0.9});
  LightSet one, two;
  one.lights.push_back({l, 1, 0.4, {3, 2, 1}});
  two.lights.push_back({l, 1, 0.4, {1.5, 1, 0.5}});
  two.lights.push_back({l, 1, 0.4, {1.5, 1, 0.5}});
  const EnvironmentMap a = project_lightset(one, 64, 32, false), b = project_lightset(two, 64, 32, false);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[i][k], b[i][k], 1e-14);
}

TEST(ProjectLightSet, MatchesDirectFormula) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  LightSet set;
  for (int i = 0; i < 3; ++i)
    set.lights.push_back({normalized(Vec3{u(rng), u(rng), u(rng)}), 1, 0.2 + std::abs(u(rng)), {1, 2 * std::abs(u(rng)), 0.5}});
  set.ambient = {0.01, 0.02, 0.03};
  const EnvironmentMap map = project_lightset(set, 32, 16, true);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      const Vec3 d = pixel_to_direction(x, y, 32, 16);
      Rgb v = set.ambient;
      for (const Light &l : set.lights) {
        const double kappa = l.solid_angle / (2 * kPi * std::log(10.0));
        v += l.color * std::exp((dot(l.direction, d) - 1) / kappa);
      }
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(map.at(x, y)[k], v[k], 1e-12);
    }
}

namespace {

LightSet random_set(std::mt19937_64 &rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LightSet set;
  for (int i = 0; i < n; ++i)
    set.lights.push_back({normalized(Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5}), 1.0, 0.2 + 3.0 * u(rng),
                          {0.2 + 3 * u(rng), 0.2 + 3 * u(rng), 0.2 + 3 * u(rng)}});
  set.ambient = {u(rng), u(rng), u(rng)};
  return set;
}

} // namespace

TEST(LossAndGradients, ZeroAtPerfectMatch) {
  std::mt19937_64 rng(8);
  const LightSet set = random_set(rng, 2);
  const EnvironmentMap target = project_lightset(set, 64, 32, false);
  const LossResult r = loss_and_gradients(set, target, set.ambient, 20, 1);
  EXPECT_EQ(r.loss, 0.0);
  for (const LightGradient &g : r.gradient.lights) {
    EXPECT_EQ(g.direction, (Vec3{}));
    EXPECT_EQ(g.solid_angle, 0.0);
    EXPECT_TRUE(g.color.is_zero());
  }
  EXPECT_TRUE(r.gradient.ambient.is_zero());
}

TEST(LossAndGradients, RenderWeightScalesLinearly) {
  std::mt19937_64 rng(12);
  const LightSet set = random_set(rng, 2);
  LightSet other = random_set(rng, 1);
  const EnvironmentMap target = project_lightset(other, 64, 32, false);
  const LossResult a = loss_and_gradients(set, target, {}, 1, 0);
  const LossResult b = loss_and_gradients(set, target, {}, 2, 0);
  EXPECT_DOUBLE_EQ(b.loss, 2 * a.loss);
  EXPECT_DOUBLE_EQ(b.render_term, a.render_term);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_DOUBLE_EQ(b.gradient.lights[i].solid_angle, 2 * a.gradient.lights[i].solid_angle);
    EXPECT_DOUBLE_EQ(b.gradient.lights[i].direction.x, 2 * a.gradient.lights[i].direction.x);
    EXPECT_DOUBLE_EQ(b.gradient.lights[i].color.g, 2 * a.gradient.lights[i].color.g);
  }
}

TEST(LossAndGradients, RenderTermIsSolidAngleMean) {
  // A constant residual of 1 in every channel averages to exactly 1.
  LightSet empty;
  const EnvironmentMap target(64, 32, Rgb{1, 1, 1});
  const LossResult r = loss_and_gradients(empty, target, {}, 1, 0);
  EXPECT_NEAR(r.render_term, 1.0, 1e-12);
}

TEST(LossAndGradients, DirectionGradientIsTangent) {
  std::mt19937_64 rng(5);
  const LightSet set = random_set(rng, 3);
  const EnvironmentMap target = project_lightset(random_set(rng, 2), 64, 32, false);
  const LossResult r = loss_and_gradients(set, target, {}, 20, 1);
  for (std::size_t i = 0; i < set.size(); ++i)
    EXPECT_NEAR(dot(r.gradient.lights[i].direction, set.lights[i].direction), 0, 1e-12);
}

TEST(LossAndGradients, MatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    const LightSet set = random_set(rng, 1 + trial % 3);
    const EnvironmentMap target = project_lightset(random_set(rng, 2), 64, 32, false);
    const Rgb ta{0.1, 0.2, 0.3};
    const LossResult r = loss_and_gradients(set, target, ta, 20, 1);
    auto loss = [&](const LightSet &s) { return loss_and_gradients(s, target, ta, 20, 1).loss; };
    auto check = [&](double analytic, double fd) {
      EXPECT_LE(std::abs(analytic - fd), 1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-6}))
          << analytic << " vs " << fd;
    };
    for (std::size_t i = 0; i < set.size(); ++i) {
      const double hs = 1e-4 * set.lights[i].solid_angle;
      LightSet p = set, m = set;
      p.lights[i].solid_angle += hs;
      m.lights[i].solid_angle -= hs;
      check(r.gradient.lights[i].solid_angle, (loss(p) - loss(m)) / (2 * hs));
      for (int k = 0; k < 3; ++k) {
        const double hc = 1e-4 * set.lights[i].color[k];
        LightSet pc = set, mc = set;
        pc.lights[i].color[k] += hc;
        mc.lights[i].color[k] -= hc;
        check(r.gradient.lights[i].color[k], (loss(pc) - loss(mc)) / (2 * hc));
      }
      const auto [e1, e2] = detail::tangent_basis(set.lights[i].direction);
      for (const Vec3 &e : {e1, e2}) {
        const double h = 1e-5;
        LightSet pl = set, ml = set;
        pl.lights[i].direction = normalized(set.lights[i].direction + e * h);
        ml.lights[i].direction = normalized(set.lights[i].direction - e * h);
        check(dot(r.gradient.lights[i].direction, e), (loss(pl) - loss(ml)) / (2 * h));
      }
    }
    for (int k = 0; k < 3; ++k) {
      LightSet pa = set, ma = set;
      pa.ambient[k] += 1e-4;
      ma.ambient[k] -= 1e-4;
      check(r.gradient.ambient[k], (loss(pa) - loss(ma)) / 2e-4);
    }
  }
}

TEST(LossAndGradients, RowOrderReductionIsReproducible) {
  // Serial recomputation with the same per-row-then-rows summation order
  // must agree bit for bit, whatever the worker split was.
  std::mt19937_64 rng(3);
  const LightSet set = random_set(rng, 3);
  const EnvironmentMap target = project_lightset(random_set(rng, 2), 128, 64, false);
  const LossResult a = loss_and_gradients(set, target, {}, 1, 0);
  const EnvironmentMap f = project_lightset(set, 128, 64, false);
  double total = 0;
  for (int y = 0; y < 64; ++y) {
    const double weight = pixel_solid_angle(y, 128, 64) * (1.0 / (3.0 * kFourPi));
    double row = 0;
    for (int x = 0; x < 128; ++x) {
      const Rgb r = f.at(x, y) - target.at(x, y);
      row += (r.r * r.r + r.g * r.g + r.b * r.b) * weight;
    }
    total += row;
  }
  EXPECT_EQ(a.render_term, total);
}
