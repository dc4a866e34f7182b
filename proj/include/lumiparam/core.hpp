#ifndef LUMIPARAM_CORE_HPP
#define LUMIPARAM_CORE_HPP

// Spherical-panorama geometry and the basic lighting value types.
//
// Equirectangular convention: Y is up, +Z is forward, right-handed. Row y
// maps to the polar angle theta = pi (y + 0.5) / height measured from +Y,
// column x maps to the azimuth phi = 2 pi (x + 0.5) / width - pi, with phi = 0
// (the +Z axis) at the center column.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lumiparam {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr Vec3 &operator+=(const Vec3 &o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3 &operator-=(const Vec3 &o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3 &operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend constexpr Vec3 operator+(Vec3 a, const Vec3 &b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3 &b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3 &a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr bool operator==(const Vec3 &, const Vec3 &) = default;
};

constexpr double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3 &a, const Vec3 &b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3 &v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3 &v) {
  const double n = norm(v);
  if (!(n > 0)) throw std::invalid_argument("cannot normalize a zero-length vector");
  return v * (1.0 / n);
}

/// Angle between two unit vectors, in radians.
inline double angle_between(const Vec3 &a, const Vec3 &b) {
  // atan2 form stays accurate near 0 and pi where acos loses digits.
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

inline double degrees(double radians) { return radians * 180.0 / kPi; }
inline double radians(double degrees) { return degrees * kPi / 180.0; }

/// Linear RGB triple.
struct Rgb {
  double r = 0, g = 0, b = 0;

  constexpr double &operator[](int i) { return i == 0 ? r : (i == 1 ? g : b); }
  constexpr double operator[](int i) const { return i == 0 ? r : (i == 1 ? g : b); }

  constexpr Rgb &operator+=(const Rgb &o) {
    r += o.r;
    g += o.g;
    b += o.b;
    return *this;
  }
  constexpr Rgb &operator-=(const Rgb &o) {
    r -= o.r;
    g -= o.g;
    b -= o.b;
    return *this;
  }
  constexpr Rgb &operator*=(double s) {
    r *= s;
    g *= s;
    b *= s;
    return *this;
  }
  friend constexpr Rgb operator+(Rgb a, const Rgb &b) { return a += b; }
  friend constexpr Rgb operator-(Rgb a, const Rgb &b) { return a -= b; }
  friend constexpr Rgb operator*(Rgb a, double s) { return a *= s; }
  friend constexpr Rgb operator*(double s, Rgb a) { return a *= s; }
  friend constexpr bool operator==(const Rgb &, const Rgb &) = default;

  [[nodiscard]] constexpr bool is_zero() const { return r == 0 && g == 0 && b == 0; }
  [[nodiscard]] double max_channel() const { return std::fmax(r, std::fmax(g, b)); }
  [[nodiscard]] double length() const { return std::sqrt(r * r + g * g + b * b); }
};

/// Rec. 709 luminance; the scalar intensity used for peak detection.
constexpr double luminance(const Rgb &c) { return 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b; }

/// One parametric source seen from the observer at the origin.
struct Light {
  Vec3 direction{0, 0, 1};  // unit vector towards the light
  double distance = 1.0;    // meters
  double solid_angle = 0.1; // steradians, in (0, 4 pi]
  Rgb color;                // linear radiance; zero means the light is off

  [[nodiscard]] bool is_off() const { return color.is_zero(); }
};

/// N lights plus an ambient RGB term.
struct LightSet {
  std::vector<Light> lights;
  Rgb ambient;

  [[nodiscard]] std::size_t size() const { return lights.size(); }
};

/// Row-major 2D grid of values.
template <typename T> class Grid {
public:
  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw std::invalid_argument("grid data size does not match dimensions");
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T &at(int x, int y) { return data_[index(x, y)]; }
  const T &at(int x, int y) const { return data_[index(x, y)]; }
  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  [[nodiscard]] std::span<const T> pixels() const { return data_; }

  friend bool operator==(const Grid &, const Grid &) = default;

protected:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Equirectangular grid of linear HDR radiance, width = 2 x height.
class EnvironmentMap : public Grid<Rgb> {
public:
  EnvironmentMap() = default;
  EnvironmentMap(int width, int height, Rgb fill = {}) : Grid(width, height, fill) { check_aspect(); }
  EnvironmentMap(int width, int height, std::vector<Rgb> data) : Grid(width, height, std::move(data)) {
    check_aspect();
    validate();
  }

  /// Throws if any value is negative or non-finite.
  void validate() const {
    for (const Rgb &c : data_)
      for (int k = 0; k < 3; ++k)
        if (!std::isfinite(c[k]) || c[k] < 0)
          throw std::invalid_argument("environment map values must be finite and non-negative");
  }

  friend bool operator==(const EnvironmentMap &, const EnvironmentMap &) = default;

private:
  void check_aspect() const {
    if (width_ != 2 * height_) throw std::invalid_argument("environment map width must equal 2 x height");
  }
};

/// Per-pixel distance in meters; 0 marks an unknown depth.
class DepthMap : public Grid<double> {
public:
  static constexpr double kUnknown = 0.0;

  DepthMap() = default;
  DepthMap(int width, int height, double fill = kUnknown) : Grid(width, height, fill) { validate(); }
  DepthMap(int width, int height, std::vector<double> data) : Grid(width, height, std::move(data)) { validate(); }

  [[nodiscard]] bool known(std::size_t i) const { return data_[i] > 0; }
  [[nodiscard]] std::size_t known_count() const {
    std::size_t n = 0;
    for (double d : data_) n += d > 0 ? 1 : 0;
    return n;
  }

  void validate() const {
    for (double d : data_)
      if (!std::isfinite(d) || d < 0) throw std::invalid_argument("depth values must be finite and non-negative");
  }
};

/// Unit direction of the center of pixel (x, y).
inline Vec3 pixel_to_direction(int x, int y, int width, int height) {
  if (x < 0 || x >= width || y < 0 || y >= height)
    throw std::out_of_range("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside " +
                            std::to_string(width) + "x" + std::to_string(height) + " map");
  const double theta = kPi * (y + 0.5) / height;
  const double phi = 2.0 * kPi * (x + 0.5) / width - kPi;
  const double st = std::sin(theta);
  return {st * std::sin(phi), std::cos(theta), st * std::cos(phi)};
}

struct Pixel {
  int x = 0, y = 0;
  friend constexpr bool operator==(const Pixel &, const Pixel &) = default;
};

/// Pixel containing direction u. Poles clamp to the first/last row and the
/// azimuth wraps modulo width.
inline Pixel direction_to_pixel(const Vec3 &u, int width, int height) {
  const double cy = std::fmax(-1.0, std::fmin(1.0, u.y));
  const double theta = std::acos(cy);
  const double phi = std::atan2(u.x, u.z);
  int y = static_cast<int>(std::floor(theta / kPi * height));
  y = std::max(0, std::min(height - 1, y));
  int x = static_cast<int>(std::floor((phi + kPi) / (2.0 * kPi) * width));
  x %= width;
  if (x < 0) x += width;
  return {x, y};
}

/// Exact solid angle of a pixel in row y: (2 pi / width)(cos(pi y / h) - cos(pi (y + 1) / h)).
inline double pixel_solid_angle(int y, int width, int height) {
  if (y < 0 || y >= height) throw std::out_of_range("row " + std::to_string(y) + " outside map");
  return (2.0 * kPi / width) * (std::cos(kPi * y / height) - std::cos(kPi * (y + 1) / height));
}

/// Per-pixel directions and per-row solid angles for one map size, computed
/// once and shared.
class SphereGrid {
public:
  SphereGrid(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
    directions_.reserve(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
      row_solid_angle_.push_back(pixel_solid_angle(y, width, height));
      for (int x = 0; x < width; ++x) directions_.push_back(pixel_to_direction(x, y, width, height));
    }
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return directions_.size(); }
  [[nodiscard]] const Vec3 &direction(std::size_t i) const { return directions_[i]; }
  [[nodiscard]] const Vec3 &direction(int x, int y) const {
    return directions_[static_cast<std::size_t>(y) * width_ + x];
  }
  [[nodiscard]] double solid_angle_of_row(int y) const { return row_solid_angle_[y]; }
  [[nodiscard]] double solid_angle(std::size_t i) const { return row_solid_angle_[i / width_]; }

private:
  int width_;
  int height_;
  std::vector<Vec3> directions_;
  std::vector<double> row_solid_angle_;
};

/// Shared, cached SphereGrid for a map size. Thread-safe.
inline std::shared_ptr<const SphereGrid> sphere_grid(int width, int height) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const SphereGrid>> cache;
  std::lock_guard lock(mutex);
  auto &slot = cache[{width, height}];
  if (!slot) slot = std::make_shared<const SphereGrid>(width, height);
  return slot;
}

/// Solid-angle-weighted mean RGB over the pixels selected by `include`.
/// Returns zero when nothing is selected.
template <typename Predicate>
Rgb weighted_mean_rgb(const EnvironmentMap &map, Predicate &&include) {
  Rgb sum;
  double weight = 0;
  for (int y = 0; y < map.height(); ++y) {
    const double w = pixel_solid_angle(y, map.width(), map.height());
    for (int x = 0; x < map.width(); ++x) {
      if (!include(map.index(x, y))) continue;
      sum += map.at(x, y) * w;
      weight += w;
    }
  }
  return weight > 0 ? sum * (1.0 / weight) : Rgb{};
}

} // namespace lumiparam

#endif // LUMIPARAM_CORE_HPP
