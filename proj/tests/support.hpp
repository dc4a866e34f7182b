#ifndef LUMIPARAM_TESTS_SUPPORT_HPP
#define LUMIPARAM_TESTS_SUPPORT_HPP

#include "lumiparam/lumiparam.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace lumiparam::testing {

struct Disc {
  Vec3 direction;
  double radius_degrees;
  Rgb color;
};

/// Panorama with uniform-color hard discs over a constant background.
inline EnvironmentMap disc_panorama(int width, int height, const std::vector<Disc> &discs, Rgb background = {}) {
  EnvironmentMap map(width, height, background);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec3 u = pixel_to_direction(x, y, width, height);
      for (const Disc &d : discs)
        if (degrees(angle_between(u, d.direction)) <= d.radius_degrees) map.at(x, y) = d.color;
    }
  return map;
}

inline Vec3 from_angles(double azimuth_degrees, double elevation_degrees) {
  const double az = radians(azimuth_degrees), el = radians(elevation_degrees);
  return {std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
}

inline double cap_solid_angle(double radius_degrees) { return 2.0 * kPi * (1.0 - std::cos(radians(radius_degrees))); }

inline double relative_error(const Rgb &a, const Rgb &b) { return (a - b).length() / b.length(); }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lumiparam-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  [[nodiscard]] std::filesystem::path operator/(const std::string &name) const { return path_ / name; }
  [[nodiscard]] const std::filesystem::path &path() const { return path_; }

private:
  std::filesystem::path path_;
};

} // namespace lumiparam::testing

#endif // LUMIPARAM_TESTS_SUPPORT_HPP
