#ifndef LUMIPARAM_CLI_HPP
#define LUMIPARAM_CLI_HPP

// Command-line front end. run() is callable in-process so tests can drive
// every subcommand without spawning a shell.

#include "lumiparam/extract.hpp"
#include "lumiparam/io.hpp"
#include "lumiparam/optimize.hpp"
#include "lumiparam/render_eval.hpp"
#include "lumiparam/spatial.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace lumiparam::cli {

struct CommandResult {
  int exit_code = 0; // 0 success, 1 usage error, 2 data error
  std::vector<std::filesystem::path> artifacts;
};

/// Bad input data or a failed computation on it; always exit code 2.
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

namespace fs = std::filesystem;

/// Collects outputs under temporary names and renames them into place only
/// once every output of the command has been written.
class Staging {
public:
  Staging() = default;
  Staging(const Staging &) = delete;
  Staging &operator=(const Staging &) = delete;
  ~Staging() {
    for (const auto &[tmp, final] : files_) {
      std::error_code ec;
      fs::remove(tmp, ec);
    }
  }

  /// Temporary path next to `final`, keeping its extension so writers that
  /// dispatch on it still work.
  fs::path stage(const fs::path &final) {
    fs::path tmp = final;
    tmp.replace_filename("." + final.stem().string() + ".partial" + final.extension().string());
    files_.emplace_back(tmp, final);
    return tmp;
  }

  std::vector<fs::path> commit() {
    std::vector<fs::path> out;
    for (const auto &[tmp, final] : files_) {
      std::error_code ec;
      fs::rename(tmp, final, ec);
      if (ec) throw DataError(final.string() + ": cannot write (" + ec.message() + ")");
      out.push_back(final);
    }
    files_.clear();
    return out;
  }

private:
  std::vector<std::pair<fs::path, fs::path>> files_;
};

/// Runs a loader and tags any failure with the file it came from.
template <class F> auto load(const std::string &path, F &&fn) -> decltype(fn(path)) {
  try {
    return fn(path);
  } catch (const std::exception &e) {
    throw DataError(path + ": " + e.what());
  }
}

inline EnvironmentMap load_map(const std::string &path) { return load(path, [](const std::string &p) { return load_envmap(p); }); }
inline DepthMap load_depth(const std::string &path) { return load(path, [](const std::string &p) { return load_depthmap(p); }); }
inline LightSet load_lights(const std::string &path) { return load(path, [](const std::string &p) { return load_lightset(p); }); }

inline void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

inline std::string format_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

/// Light-set documents are JSON objects; anything else is treated as an image.
inline bool looks_like_lightset(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  char c = 0;
  while (in.get(c))
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  return false;
}

inline std::vector<double> split_numbers(const std::string &text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception &) {
      throw CLI::ValidationError("'" + text + "' is not a number list");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw CLI::ValidationError("'" + text + "' is not a number list");
    out.push_back(v);
  }
  return out;
}

inline Vec3 parse_vec3(const std::string &text) {
  const auto v = split_numbers(text, ',');
  if (v.size() != 3) throw CLI::ValidationError("expected x,y,z but got '" + text + "'");
  return {v[0], v[1], v[2]};
}

inline std::vector<Translation> parse_offsets(const std::string &text) {
  std::vector<Translation> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (!item.empty()) out.push_back(parse_vec3(item));
  if (out.empty()) throw CLI::ValidationError("no offsets in '" + text + "'");
  return out;
}

inline std::pair<int, int> parse_size(const std::string &text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw CLI::ValidationError("expected WxH but got '" + text + "'");
  try {
    std::size_t a = 0, b = 0;
    const int w = std::stoi(text.substr(0, x), &a);
    const int h = std::stoi(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1 || w <= 0 || h <= 0) throw std::invalid_argument("size");
    return {w, h};
  } catch (const std::exception &) {
    throw CLI::ValidationError("expected WxH but got '" + text + "'");
  }
}

} // namespace detail

/// Parses and executes one command line (program name excluded).
inline CommandResult run(const std::vector<std::string> &args, std::ostream &out = std::cout,
                         std::ostream &err = std::cerr) {
  using detail::Staging;
  CLI::App app{"Parametric lighting toolkit for HDR panoramas", "lumiparam"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::string input, input2, output, depth_path, t_text, size_text, offsets_text, trace_path, png_path;
  int n_lights = 3, iterations = FitOptions{}.iterations, half_life = FitOptions{}.lr_half_life;
  int resolution = kDefaultProbeResolution;
  double lr = FitOptions{}.learning_rate, exposure = 1.0, az = 0, el = 0, fov = 60;
  std::uint64_t seed = 0;
  bool ambient = false;
  LossConfig loss_cfg;

  std::function<std::vector<std::filesystem::path>(Staging &)> action;

  auto *extract = app.add_subcommand("extract", "Detect lights in a panorama and write a light set");
  extract->add_option("panorama", input, "Input panorama (.hdr or .pfm)")->required();
  extract->add_option("--depth", depth_path, "Depth map (.pfm) giving light distances");
  extract->add_option("-o,--output", output, "Output light set")->required();
  extract->callback([&] {
    action = [&](Staging &stage) {
      const EnvironmentMap map = detail::load_map(input);
      std::optional<DepthMap> depth;
      if (!depth_path.empty()) depth = detail::load_depth(depth_path);
      const LightSet set = detail::load(input, [&](const std::string &) {
        return extract_lightset(map, depth ? &*depth : nullptr);
      });
      save_lightset(set, stage.stage(output));
      return stage.commit();
    };
  });

  auto *project = app.add_subcommand("project", "Render a light set to an environment map");
  project->add_option("lights", input, "Input light set")->required();
  project->add_option("--size", size_text, "Map size WxH (W = 2H)")->required();
  project->add_flag("--ambient", ambient, "Add the ambient term");
  project->add_option("-o,--output", output, "Output environment map")->required();
  project->callback([&] {
    const auto [w, h] = detail::parse_size(size_text);
    if (w != 2 * h) throw CLI::ValidationError("--size must have width = 2 x height");
    action = [&, w, h](Staging &stage) {
      const LightSet set = detail::load_lights(input);
      save_image(project_lightset(set, w, h, ambient), stage.stage(output));
      return stage.commit();
    };
  });

  auto *relocate = app.add_subcommand("relocate", "Re-express a light set from a displaced observer");
  relocate->add_option("lights", input, "Input light set")->required();
  relocate->add_option("--t", t_text, "Translation x,y,z in meters")->required();
  relocate->add_option("-o,--output", output, "Output light set")->required();
  relocate->callback([&] {
    const Vec3 t = detail::parse_vec3(t_text);
    action = [&, t](Staging &stage) {
      const LightSet set = detail::load_lights(input);
      LightSet moved;
      try {
        moved = relocate_lightset(set, t);
      } catch (const std::exception &e) {
        throw DataError(input + ": " + e.what());
      }
      save_lightset(moved, stage.stage(output));
      return stage.commit();
    };
  });

  auto *warp = app.add_subcommand("warp", "Warp a panorama to a displaced observer");
  warp->add_option("panorama", input, "Input panorama")->required();
  warp->add_option("--depth", depth_path, "Depth map (.pfm)")->required();
  warp->add_option("--t", t_text, "Translation x,y,z in meters")->required();
  warp->add_option("-o,--output", output, "Output panorama")->required();
  warp->callback([&] {
    const Vec3 t = detail::parse_vec3(t_text);
    action = [&, t](Staging &stage) {
      const EnvironmentMap map = detail::load_map(input);
      const DepthMap depth = detail::load_depth(depth_path);
      const EnvironmentMap moved =
          detail::load(depth_path, [&](const std::string &) { return warp_envmap(map, depth, t); });
      save_image(moved, stage.stage(output));
      return stage.commit();
    };
  });

  auto *refine = app.add_subcommand("refine", "Rescale light intensities against a panorama");
  refine->add_option("lights", input, "Input light set, one light per detected source")->required();
  refine->add_option("panorama", input2, "Panorama the lights were extracted from")->required();
  refine->add_option("-o,--output", output, "Output light set")->required();
  refine->callback([&] {
    action = [&](Staging &stage) {
      const LightSet set = detail::load_lights(input);
      const EnvironmentMap map = detail::load_map(input2);
      const std::vector<LightMask> masks = detect_lights(map);
      if (masks.size() != set.lights.size())
        throw DataError(input + ": has " + std::to_string(set.lights.size()) + " lights but " + input2 + " has " +
                        std::to_string(masks.size()) + " detected sources");
      const RefineResult r = refine_intensities(set, map, masks);
      for (const std::string &w : r.warnings) err << "warning: " << w << '\n';
      save_lightset(r.lights, stage.stage(output));
      return stage.commit();
    };
  });

  auto *fit = app.add_subcommand("fit", "Fit N parametric lights to a panorama");
  fit->add_option("panorama", input, "Target panorama")->required();
  fit->add_option("--n", n_lights, "Number of lights")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_option("--iters", iterations, "Iterations")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_option("--lr", lr, "Learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_option("--half-life", half_life, "Iterations between learning-rate halvings")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit->add_option("--seed", seed, "Initialization seed")->capture_default_str();
  fit->add_option("--wr", loss_cfg.w_r, "Render loss weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  fit->add_option("--wa", loss_cfg.w_a, "Ambient loss weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  fit->add_option("--threshold", loss_cfg.threshold_fraction, "Fraction of peak luminance kept")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  fit->add_option("-o,--output", output, "Output light set")->required();
  fit->add_option("--trace", trace_path, "CSV of the loss per iteration");
  fit->callback([&] {
    action = [&](Staging &stage) {
      const EnvironmentMap map = detail::load_map(input);
      FitOptions opts;
      opts.iterations = iterations;
      opts.learning_rate = lr;
      opts.lr_half_life = half_life;
      opts.seed = seed;
      const FitResult r = detail::load(input, [&](const std::string &) {
        return fit_lightset(map, static_cast<std::size_t>(n_lights), loss_cfg, opts);
      });
      save_lightset(r.lights, stage.stage(output));
      if (!trace_path.empty()) {
        std::string csv = "iteration,loss\n";
        for (std::size_t i = 0; i < r.trace.size(); ++i)
          csv += std::to_string(i) + "," + detail::format_number(r.trace[i]) + "\n";
        detail::write_text(stage.stage(trace_path), csv);
      }
      return stage.commit();
    };
  });

  auto *render = app.add_subcommand("render", "Render a diffuse probe from a light set or a panorama");
  render->add_option("input", input, "Light set or panorama")->required();
  render->add_option("--res", resolution, "Probe resolution")->capture_default_str()->check(CLI::Range(16, 4096));
  render->add_option("-o,--output", output, "Output probe (.hdr or .pfm)")->required();
  render->add_option("--png", png_path, "Tone-mapped 8-bit preview");
  render->add_option("--exposure", exposure, "Preview exposure multiplier")->capture_default_str()->check(CLI::PositiveNumber);
  render->callback([&] {
    action = [&](Staging &stage) {
      const ProbeImage probe = detail::looks_like_lightset(input)
                                   ? render_sphere(detail::load_lights(input), resolution)
                                   : render_sphere(detail::load_map(input), resolution);
      save_image(probe, stage.stage(output));
      if (!png_path.empty()) save_preview(probe, stage.stage(png_path), exposure);
      return stage.commit();
    };
  });

  auto *evaluate = app.add_subcommand("evaluate", "Score a light set against a panorama at several positions");
  evaluate->add_option("lights", input, "Predicted light set")->required();
  evaluate->add_option("panorama", input2, "Ground-truth panorama")->required();
  evaluate->add_option("--depth", depth_path, "Ground-truth depth map (.pfm)")->required();
  evaluate->add_option("--offsets", offsets_text, "Observer offsets \"x,y,z;x,y,z;...\" (default: center and +-1 m in x)");
  evaluate->add_option("--res", resolution, "Probe resolution")->capture_default_str()->check(CLI::Range(16, 4096));
  evaluate->add_option("-o,--output", output, "Output CSV report")->required();
  evaluate->callback([&] {
    const std::vector<Translation> offsets =
        offsets_text.empty() ? default_offsets() : detail::parse_offsets(offsets_text);
    action = [&, offsets](Staging &stage) {
      const LightSet set = detail::load_lights(input);
      const EnvironmentMap map = detail::load_map(input2);
      const DepthMap depth = detail::load_depth(depth_path);
      const EvalReport report = detail::load(input2, [&](const std::string &) {
        return evaluate_at_positions(set, map, depth, offsets, resolution);
      });
      std::string csv = "offset_x,offset_y,offset_z,rmse,si_rmse\n";
      for (const EvalEntry &e : report.entries)
        csv += detail::format_number(e.offset.x) + "," + detail::format_number(e.offset.y) + "," +
               detail::format_number(e.offset.z) + "," + detail::format_number(e.rmse) + "," +
               detail::format_number(e.si_rmse) + "\n";
      detail::write_text(stage.stage(output), csv);
      return stage.commit();
    };
  });

  auto *crop = app.add_subcommand("crop", "Extract a rectilinear view from a panorama");
  crop->add_option("panorama", input, "Input panorama")->required();
  crop->add_option("--az", az, "Azimuth in degrees")->capture_default_str();
  crop->add_option("--el", el, "Elevation in degrees")->capture_default_str();
  crop->add_option("--fov", fov, "Horizontal field of view in degrees")->capture_default_str()->check(CLI::Range(0.0, 180.0));
  crop->add_option("--size", size_text, "Crop size WxH")->required();
  crop->add_option("-o,--output", output, "Output image")->required();
  crop->callback([&] {
    const auto [w, h] = detail::parse_size(size_text);
    if (!(fov > 0 && fov < 180)) throw CLI::ValidationError("--fov must be in (0, 180)");
    action = [&, w, h](Staging &stage) {
      const EnvironmentMap map = detail::load_map(input);
      save_image(crop_view(map, az, el, fov, w, h), stage.stage(output));
      return stage.commit();
    };
  });

  CommandResult result;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return result;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    result.exit_code = 1;
    return result;
  }

  try {
    Staging stage;
    result.artifacts = action(stage);
  } catch (const DataError &e) {
    err << "error: " << e.what() << '\n';
    result.exit_code = 2;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    result.exit_code = 2;
  }
  return result;
}

} // namespace lumiparam::cli

#endif // LUMIPARAM_CLI_HPP
