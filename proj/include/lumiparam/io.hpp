#ifndef LUMIPARAM_IO_HPP
#define LUMIPARAM_IO_HPP

// File formats: Radiance RGBE (.hdr), PFM, the JSON light-set document and
// 8-bit PNG previews.

#include "lumiparam/core.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lumiparam {

class IoError : public std::runtime_error {
public:
  enum class Kind {
    unreadable,
    unwritable,
    unexpected_eof,
    malformed_header,
    bad_aspect,
    negative_value,
    invalid_value,
    invalid_document,
  };

  IoError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

private:
  Kind kind_;
};

enum class ImageFormat { rgbe, pfm };

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::unreadable, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::unwritable, "cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoError::Kind::unwritable, "write failed for " + path.string());
}

/// Sequential reader over an in-memory file.
class ByteReader {
public:
  explicit ByteReader(const std::vector<std::uint8_t> &bytes) : bytes_(bytes) {}

  [[nodiscard]] bool at_end() const { return pos_ >= bytes_.size(); }

  std::uint8_t byte() {
    if (at_end()) throw IoError(IoError::Kind::unexpected_eof, "unexpected end of stream");
    return bytes_[pos_++];
  }

  void read(std::uint8_t *dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) throw IoError(IoError::Kind::unexpected_eof, "unexpected end of stream");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  /// Text line without the trailing newline.
  std::string line() {
    std::string s;
    for (;;) {
      const std::uint8_t c = byte();
      if (c == '\n') return s;
      s.push_back(static_cast<char>(c));
    }
  }

  /// Whitespace-delimited token (PFM headers).
  std::string token() {
    while (!at_end() && std::isspace(bytes_[pos_])) ++pos_;
    std::string s;
    while (!at_end() && !std::isspace(bytes_[pos_])) s.push_back(static_cast<char>(bytes_[pos_++]));
    if (s.empty()) throw IoError(IoError::Kind::unexpected_eof, "unexpected end of stream");
    return s;
  }

  /// Consumes exactly one whitespace byte (the PFM header terminator).
  void single_space() {
    if (!std::isspace(byte())) throw IoError(IoError::Kind::malformed_header, "malformed PFM header");
  }

private:
  const std::vector<std::uint8_t> &bytes_;
  std::size_t pos_ = 0;
};

inline int parse_int(const std::string &s, const char *what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used != s.size() || v <= 0) throw IoError(IoError::Kind::malformed_header, std::string("bad ") + what);
  return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// RGBE

/// Shared-exponent encoding. Mantissas are rounded, so every channel decodes
/// within max(r, g, b) / 256 of its input.
inline std::array<std::uint8_t, 4> rgbe_encode(const Rgb &c) {
  const double v = c.max_channel();
  if (!(v >= 1e-32)) return {0, 0, 0, 0};
  int e = 0;
  std::frexp(v, &e);
  double scale = std::ldexp(256.0, -e);
  if (std::lround(v * scale) > 255) {
    ++e;
    scale *= 0.5;
  }
  if (e + 128 > 255) e = 127, scale = std::ldexp(256.0, -e);
  auto q = [&](double ch) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(ch * scale), 0L, 255L));
  };
  return {q(c.r), q(c.g), q(c.b), static_cast<std::uint8_t>(e + 128)};
}

inline Rgb rgbe_decode(const std::array<std::uint8_t, 4> &p) {
  if (p[3] == 0) return {};
  const double f = std::ldexp(1.0, static_cast<int>(p[3]) - (128 + 8));
  return {p[0] * f, p[1] * f, p[2] * f};
}

namespace detail {

inline void read_rle_scanline(ByteReader &in, std::vector<std::array<std::uint8_t, 4>> &row) {
  const int width = static_cast<int>(row.size());
  for (int ch = 0; ch < 4; ++ch) {
    int x = 0;
    while (x < width) {
      int count = in.byte();
      if (count > 128) {
        count -= 128;
        if (x + count > width) throw IoError(IoError::Kind::invalid_value, "bad RLE run in RGBE scanline");
        const std::uint8_t value = in.byte();
        for (int k = 0; k < count; ++k) row[x++][ch] = value;
      } else {
        if (count == 0 || x + count > width)
          throw IoError(IoError::Kind::invalid_value, "bad RLE count in RGBE scanline");
        for (int k = 0; k < count; ++k) row[x++][ch] = in.byte();
      }
    }
  }
}

inline void read_flat_scanline(ByteReader &in, std::vector<std::array<std::uint8_t, 4>> &row,
                               std::size_t first = 0) {
  for (std::size_t x = first; x < row.size(); ++x) in.read(row[x].data(), 4);
}

} // namespace detail

/// Any-size RGBE image (probes and crops are not 2:1).
inline Grid<Rgb> load_rgbe_image(const std::filesystem::path &path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader in(bytes);
  const std::string magic = in.line();
  if (magic.rfind("#?", 0) != 0) throw IoError(IoError::Kind::malformed_header, "missing #?RADIANCE signature");
  for (;;) {
    const std::string line = in.line();
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0 && line != "FORMAT=32-bit_rle_rgbe")
      throw IoError(IoError::Kind::malformed_header, "unsupported pixel format " + line.substr(7));
  }
  const std::string resolution = in.line();
  std::istringstream rs(resolution);
  std::string ny, nx, hs, ws, rest;
  rs >> ny >> hs >> nx >> ws;
  if (ny != "-Y" || nx != "+X" || (rs >> rest))
    throw IoError(IoError::Kind::malformed_header, "unsupported resolution line '" + resolution + "'");
  const int height = detail::parse_int(hs, "image height");
  const int width = detail::parse_int(ws, "image width");

  Grid<Rgb> image(width, height);
  std::vector<std::array<std::uint8_t, 4>> row(width);
  for (int y = 0; y < height; ++y) {
    if (width >= 8 && width < 32768) {
      std::array<std::uint8_t, 4> head{};
      in.read(head.data(), 4);
      if (head[0] == 2 && head[1] == 2 && (head[2] & 0x80) == 0) {
        if (((head[2] << 8) | head[3]) != width)
          throw IoError(IoError::Kind::invalid_value, "RGBE scanline width mismatch");
        detail::read_rle_scanline(in, row);
      } else {
        row[0] = head;
        detail::read_flat_scanline(in, row, 1);
      }
    } else {
      detail::read_flat_scanline(in, row);
    }
    for (int x = 0; x < width; ++x) image.at(x, y) = rgbe_decode(row[x]);
  }
  return image;
}

inline void save_rgbe_image(const Grid<Rgb> &image, const std::filesystem::path &path) {
  std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(image.height()) + " +X " +
                       std::to_string(image.width()) + "\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + image.size() * 4);
  for (const Rgb &c : image.pixels()) {
    const auto p = rgbe_encode(c);
    bytes.insert(bytes.end(), p.begin(), p.end());
  }
  detail::write_file(path, bytes);
}

// ---------------------------------------------------------------------------
// PFM

namespace detail {

struct Pfm {
  int width = 0, height = 0, channels = 0;
  std::vector<float> values; // top-to-bottom rows, interleaved channels
};

inline Pfm read_pfm(const std::filesystem::path &path) {
  const auto bytes = read_file(path);
  ByteReader in(bytes);
  Pfm pfm;
  const std::string magic = in.token();
  if (magic == "PF")
    pfm.channels = 3;
  else if (magic == "Pf")
    pfm.channels = 1;
  else
    throw IoError(IoError::Kind::malformed_header, "missing PF/Pf signature");
  pfm.width = parse_int(in.token(), "image width");
  pfm.height = parse_int(in.token(), "image height");
  const std::string scale_text = in.token();
  double scale = 0;
  try {
    scale = std::stod(scale_text);
  } catch (const std::exception &) {
    throw IoError(IoError::Kind::malformed_header, "bad PFM scale '" + scale_text + "'");
  }
  if (scale == 0 || !std::isfinite(scale)) throw IoError(IoError::Kind::malformed_header, "bad PFM scale");
  in.single_space();
  const bool little = scale < 0;

  const std::size_t row_len = static_cast<std::size_t>(pfm.width) * pfm.channels;
  pfm.values.resize(row_len * pfm.height);
  std::vector<std::uint8_t> raw(row_len * 4);
  for (int r = 0; r < pfm.height; ++r) {
    in.read(raw.data(), raw.size());
    // PFM stores rows bottom to top.
    float *dst = pfm.values.data() + row_len * (pfm.height - 1 - r);
    for (std::size_t i = 0; i < row_len; ++i) {
      std::uint32_t u = 0;
      const std::uint8_t *b = raw.data() + 4 * i;
      if (little)
        u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      else
        u = b[3] | (b[2] << 8) | (b[1] << 16) | (static_cast<std::uint32_t>(b[0]) << 24);
      dst[i] = std::bit_cast<float>(u);
    }
  }
  for (float v : pfm.values) {
    if (!std::isfinite(v)) throw IoError(IoError::Kind::invalid_value, "non-finite value in " + path.string());
    if (v < 0) throw IoError(IoError::Kind::negative_value, "negative value in " + path.string());
  }
  return pfm;
}

/// Little-endian PFM writer.
inline void write_pfm(const std::filesystem::path &path, int width, int height, int channels,
                      const std::vector<float> &values) {
  const std::string header =
      std::string(channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  const std::size_t row_len = static_cast<std::size_t>(width) * channels;
  for (int r = height - 1; r >= 0; --r) {
    for (std::size_t i = 0; i < row_len; ++i) {
      const auto u = std::bit_cast<std::uint32_t>(values[row_len * r + i]);
      for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
    }
  }
  write_file(path, bytes);
}

inline bool has_extension(const std::filesystem::path &path, const char *ext) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Environment and depth maps

/// Loads a Radiance .hdr or an RGB .pfm file, chosen by the file signature.
inline EnvironmentMap load_envmap(const std::filesystem::path &path) {
  Grid<Rgb> image;
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError(IoError::Kind::unreadable, "cannot open " + path.string());
  char sig[2] = {0, 0};
  probe.read(sig, 2);
  probe.close();
  if (sig[0] == 'P' && (sig[1] == 'F' || sig[1] == 'f')) {
    const auto pfm = detail::read_pfm(path);
    if (pfm.channels != 3) throw IoError(IoError::Kind::malformed_header, "expected an RGB (PF) file");
    std::vector<Rgb> px(static_cast<std::size_t>(pfm.width) * pfm.height);
    for (std::size_t i = 0; i < px.size(); ++i)
      px[i] = {pfm.values[3 * i], pfm.values[3 * i + 1], pfm.values[3 * i + 2]};
    image = Grid<Rgb>(pfm.width, pfm.height, std::move(px));
  } else {
    image = load_rgbe_image(path);
  }
  if (image.width() != 2 * image.height())
    throw IoError(IoError::Kind::bad_aspect, path.string() + ": panorama must be 2:1, got " +
                                                 std::to_string(image.width()) + "x" +
                                                 std::to_string(image.height()));
  std::vector<Rgb> px(image.pixels().begin(), image.pixels().end());
  return EnvironmentMap(image.width(), image.height(), std::move(px));
}

inline void save_pfm_image(const Grid<Rgb> &image, const std::filesystem::path &path) {
  std::vector<float> values;
  values.reserve(image.size() * 3);
  for (const Rgb &c : image.pixels())
    for (int k = 0; k < 3; ++k) values.push_back(static_cast<float>(c[k]));
  detail::write_pfm(path, image.width(), image.height(), 3, values);
}

inline void save_envmap(const EnvironmentMap &map, const std::filesystem::path &path, ImageFormat format) {
  if (format == ImageFormat::pfm)
    save_pfm_image(map, path);
  else
    save_rgbe_image(map, path);
}

/// Saves by extension: .pfm writes PFM, everything else RGBE.
inline void save_image(const Grid<Rgb> &image, const std::filesystem::path &path) {
  if (detail::has_extension(path, ".pfm"))
    save_pfm_image(image, path);
  else
    save_rgbe_image(image, path);
}

inline DepthMap load_depthmap(const std::filesystem::path &path) {
  const auto pfm = detail::read_pfm(path);
  if (pfm.channels != 1) throw IoError(IoError::Kind::malformed_header, "depth maps must be single-channel (Pf)");
  return DepthMap(pfm.width, pfm.height, std::vector<double>(pfm.values.begin(), pfm.values.end()));
}

inline void save_depthmap(const DepthMap &depth, const std::filesystem::path &path) {
  std::vector<float> values(depth.pixels().begin(), depth.pixels().end());
  detail::write_pfm(path, depth.width(), depth.height(), 1, values);
}

// ---------------------------------------------------------------------------
// Light-set documents
//
//   {
//     "version": 1,
//     "ambient": [r, g, b],
//     "lights": [
//       {"direction": [x, y, z], "distance": d, "solid_angle": s, "color": [r, g, b]}
//     ]
//   }

inline constexpr int kLightSetVersion = 1;

/// Directions whose length is within this of 1 are renormalized on load.
inline constexpr double kDirectionTolerance = 0.02;

namespace detail {

inline void check_keys(const nlohmann::json &obj, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!obj.is_object()) throw IoError(IoError::Kind::invalid_document, where + " must be an object");
  for (const auto &[key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char *k) { return key == k; }))
      throw IoError(IoError::Kind::invalid_document, "unknown field '" + key + "' in " + where);
  }
  for (const char *k : allowed)
    if (!obj.contains(k)) throw IoError(IoError::Kind::invalid_document, "missing field '" + std::string(k) + "' in " + where);
}

inline double number(const nlohmann::json &v, const std::string &where) {
  if (!v.is_number()) throw IoError(IoError::Kind::invalid_document, where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw IoError(IoError::Kind::invalid_document, where + " must be finite");
  return d;
}

inline std::array<double, 3> triple(const nlohmann::json &v, const std::string &where) {
  if (!v.is_array() || v.size() != 3) throw IoError(IoError::Kind::invalid_document, where + " must be 3 numbers");
  return {number(v[0], where), number(v[1], where), number(v[2], where)};
}

inline Rgb color_triple(const nlohmann::json &v, const std::string &where) {
  const auto t = triple(v, where);
  for (double c : t)
    if (c < 0) throw IoError(IoError::Kind::negative_value, where + " has a negative channel");
  return {t[0], t[1], t[2]};
}

} // namespace detail

inline LightSet parse_lightset(const std::string &text, const std::string &source = "light set") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw IoError(IoError::Kind::invalid_document, source + ": " + e.what());
  }
  detail::check_keys(doc, {"version", "ambient", "lights"}, source);
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kLightSetVersion)
    throw IoError(IoError::Kind::invalid_document, source + ": unsupported version");
  LightSet set;
  set.ambient = detail::color_triple(doc["ambient"], "ambient");
  if (!doc["lights"].is_array()) throw IoError(IoError::Kind::invalid_document, "lights must be a list");
  for (std::size_t i = 0; i < doc["lights"].size(); ++i) {
    const auto &rec = doc["lights"][i];
    const std::string where = "light " + std::to_string(i);
    detail::check_keys(rec, {"direction", "distance", "solid_angle", "color"}, where);
    Light light;
    const auto l = detail::triple(rec["direction"], where + " direction");
    const Vec3 dir{l[0], l[1], l[2]};
    const double len = norm(dir);
    if (!(std::abs(len - 1.0) <= kDirectionTolerance))
      throw IoError(IoError::Kind::invalid_value, where + ": direction is not unit length");
    light.direction = dir * (1.0 / len);
    light.distance = detail::number(rec["distance"], where + " distance");
    if (!(light.distance > 0)) throw IoError(IoError::Kind::negative_value, where + ": distance must be positive");
    light.solid_angle = detail::number(rec["solid_angle"], where + " solid_angle");
    if (!(light.solid_angle > 0 && light.solid_angle <= kFourPi))
      throw IoError(IoError::Kind::negative_value, where + ": solid_angle must be in (0, 4pi]");
    light.color = detail::color_triple(rec["color"], where + " color");
    set.lights.push_back(light);
  }
  return set;
}

inline std::string format_lightset(const LightSet &set) {
  nlohmann::json doc;
  doc["version"] = kLightSetVersion;
  doc["ambient"] = {set.ambient.r, set.ambient.g, set.ambient.b};
  doc["lights"] = nlohmann::json::array();
  for (const Light &l : set.lights) {
    doc["lights"].push_back({
        {"direction", {l.direction.x, l.direction.y, l.direction.z}},
        {"distance", l.distance},
        {"solid_angle", l.solid_angle},
        {"color", {l.color.r, l.color.g, l.color.b}},
    });
  }
  return doc.dump(2) + "\n";
}

inline LightSet load_lightset(const std::filesystem::path &path) {
  const auto bytes = detail::read_file(path);
  return parse_lightset(std::string(bytes.begin(), bytes.end()), path.string());
}

inline void save_lightset(const LightSet &set, const std::filesystem::path &path) {
  const std::string text = format_lightset(set);
  detail::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------
// PNG preview

/// Display byte for a linear value: clamp((exposure v)^(1/2.2), 0, 1) * 255, rounded.
inline std::uint8_t preview_byte(double v, double exposure) {
  const double t = std::clamp(std::pow(std::max(0.0, exposure * v), 1.0 / 2.2), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(t * 255.0));
}

inline void save_preview(const Grid<Rgb> &image, const std::filesystem::path &path, double exposure) {
  if (!(exposure > 0)) throw std::invalid_argument("exposure must be positive");
  std::vector<std::uint8_t> rgb(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i)
    for (int k = 0; k < 3; ++k) rgb[3 * i + k] = preview_byte(image[i][k], exposure);

  std::FILE *fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError(IoError::Kind::unwritable, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError(IoError::Kind::unwritable, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y)
    png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * image.width() * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

} // namespace lumiparam

#endif // LUMIPARAM_IO_HPP
