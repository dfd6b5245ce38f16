#include "fanet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fanet/error.hpp"
#include "fanet/rng.hpp"

namespace fanet {

namespace {

constexpr double kPi = std::numbers::pi;

// Hue centres (degrees) for classes 1..4.
constexpr std::array<double, 4> kClassHue{0.0, 95.0, 190.0, 280.0};

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  for (auto& ch : rgb) ch += m;
  return rgb;
}

bool inside_polygon(const std::vector<std::array<double, 2>>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) {
      in = !in;
    }
  }
  return in;
}

void paint_background(const SceneSpec& spec, Rng& rng, Image& img) {
  const auto base = hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.0, 0.25), rng.uniform(0.3, 0.7));
  const double n = spec.size;
  for (std::size_t y = 0; y < spec.size; ++y) {
    for (std::size_t x = 0; x < spec.size; ++x) {
      const double grain = rng.uniform(-0.03, 0.03);
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(base[c] + grain, 0.0, 1.0);
    }
  }
  // Clutter: low-saturation textured patches of random hue.
  for (std::size_t k = 0; k < spec.clutter_patches; ++k) {
    const bool ellipse = rng.bernoulli(0.5);
    const double cx = rng.uniform(0, n), cy = rng.uniform(0, n);
    const double rx = rng.uniform(0.03, 0.2) * n, ry = rng.uniform(0.03, 0.2) * n;
    const auto color = hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.0, 0.4), rng.uniform(0.2, 0.9));
    const double noise = rng.uniform(0.0, 0.08);
    for (std::size_t y = 0; y < spec.size; ++y) {
      for (std::size_t x = 0; x < spec.size; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        const bool in = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!in) continue;
        const double grain = rng.uniform(-noise, noise);
        for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(color[c] + grain, 0.0, 1.0);
      }
    }
  }
}

ObjectMeta sample_object(const SceneSpec& spec, Rng& rng) {
  ObjectMeta o;
  const double n = spec.size;
  o.class_id = 1 + static_cast<int>(rng.below(spec.num_classes - 1));
  o.kind = static_cast<ShapeKind>(rng.below(3));
  o.center_x = rng.uniform(0, n);
  o.center_y = rng.uniform(0, n);
  o.scale = std::exp(rng.uniform(std::log(spec.scale_min), std::log(spec.scale_max)));
  const double r = 0.5 * o.scale * n;
  o.radius_x = r;
  o.radius_y = r * rng.uniform(0.5, 1.0);
  o.angle = rng.uniform(0, kPi);
  if (o.kind == ShapeKind::polygon) {
    const std::size_t k = 3 + static_cast<std::size_t>(rng.below(5));
    for (std::size_t i = 0; i < k; ++i) {
      const double a = 2.0 * kPi * (i + rng.uniform(0.1, 0.9)) / static_cast<double>(k);
      const double rr = r * rng.uniform(0.6, 1.0);
      o.polygon.push_back({o.center_x + rr * std::cos(a), o.center_y + rr * std::sin(a)});
    }
  }
  o.color = hsv_to_rgb(kClassHue[o.class_id - 1] + rng.uniform(-20, 20), rng.uniform(0.55, 1.0),
                       rng.uniform(0.55, 1.0));
  o.translucent = rng.bernoulli(spec.translucent_fraction);
  o.alpha = o.translucent ? rng.uniform(spec.alpha_min, spec.alpha_max) : 1.0;
  return o;
}

nlohmann::json spec_json(const SceneSpec& s) {
  return {{"seed", s.seed},
          {"size", s.size},
          {"num_classes", s.num_classes},
          {"objects_min", s.objects_min},
          {"objects_max", s.objects_max},
          {"translucent_fraction", s.translucent_fraction},
          {"alpha_min", s.alpha_min},
          {"alpha_max", s.alpha_max},
          {"scale_min", s.scale_min},
          {"scale_max", s.scale_max},
          {"clutter_patches", s.clutter_patches}};
}

std::string indexed(const char* stem, std::size_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, index, ext);
  return buf;
}

}  // namespace

void SceneSpec::validate() const {
  if (size == 0) throw ValidationError("scene size must be >= 1");
  if (num_classes != 5) throw ValidationError("scene num_classes must be 5");
  if (objects_min > objects_max) throw ValidationError("objects_min must be <= objects_max");
  if (!(translucent_fraction >= 0.0 && translucent_fraction <= 1.0)) {
    throw ValidationError("translucent_fraction must lie in [0, 1]");
  }
  if (!(alpha_min > 0.0 && alpha_min <= alpha_max && alpha_max < 1.0)) {
    throw ValidationError("alpha range must satisfy 0 < alpha_min <= alpha_max < 1");
  }
  if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0)) {
    throw ValidationError("scale range must satisfy 0 < scale_min <= scale_max <= 1");
  }
}

const char* shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::ellipse: return "ellipse";
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::polygon: return "polygon";
  }
  return "unknown";
}

bool ObjectMeta::contains(double x, double y) const {
  if (kind == ShapeKind::polygon) return inside_polygon(polygon, x, y);
  const double dx = x - center_x, dy = y - center_y;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double u = (ca * dx + sa * dy) / radius_x;
  const double v = (-sa * dx + ca * dy) / radius_y;
  if (kind == ShapeKind::ellipse) return u * u + v * v <= 1.0;
  return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
}

SceneSample compose_scene(Image background, std::vector<ObjectMeta> objects) {
  if (background.channels != 3) throw DimensionError("compose_scene: background must be RGB");
  SceneSample s;
  s.mask = LabelMap(background.height, background.width, 0);
  s.image = std::move(background);
  for (const auto& o : objects) {
    for (std::size_t y = 0; y < s.image.height; ++y) {
      for (std::size_t x = 0; x < s.image.width; ++x) {
        if (!o.contains(x + 0.5, y + 0.5)) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          double& px = s.image.at(y, x, c);
          px = o.translucent ? o.alpha * o.color[c] + (1.0 - o.alpha) * px : o.color[c];
        }
        s.mask.at(y, x) = static_cast<std::uint8_t>(o.class_id);
      }
    }
  }
  s.objects = std::move(objects);
  return s;
}

SceneSample generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  Rng rng(spec.seed, index);
  Image bg(spec.size, spec.size, 3);
  paint_background(spec, rng, bg);
  const std::size_t count =
      spec.objects_min + static_cast<std::size_t>(rng.below(spec.objects_max - spec.objects_min + 1));
  std::vector<ObjectMeta> objects;
  for (std::size_t k = 0; k < count; ++k) objects.push_back(sample_object(spec, rng));
  return compose_scene(std::move(bg), std::move(objects));
}

SplitSummary generate_split(const SceneSpec& spec, std::size_t n_train, std::size_t n_val,
                            std::size_t n_test, const std::filesystem::path& out_dir) {
  spec.validate();
  if (n_train == 0) throw ValidationError("train count must be >= 1");
  if (n_val == 0) throw ValidationError("val count must be >= 1");
  if (n_test == 0) throw ValidationError("test count must be >= 1");
  namespace fs = std::filesystem;
  nlohmann::json manifest;
  manifest["spec"] = spec_json(spec);
  const std::array<std::pair<const char*, std::size_t>, 3> splits{
      {{"train", n_train}, {"val", n_val}, {"test", n_test}}};
  std::size_t index = 0;
  for (const auto& [name, count] : splits) {
    const fs::path dir = out_dir / name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t k = 0; k < count; ++k, ++index) {
      const auto sample = generate_scene(spec, index);
      const auto image_name = indexed("image", index, "ppm");
      const auto mask_name = indexed("mask", index, "pgm");
      ppm_write(dir / image_name, sample.image);
      pgm_write(dir / mask_name, sample.mask);
      files.push_back({{"image", image_name}, {"index", index}, {"mask", mask_name}});
    }
    manifest["splits"][name] = files;
  }
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return {n_train, n_val, n_test};
}

std::vector<LabeledImage> load_split(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("split directory not found: " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto fname = entry.path().filename().string();
    if (fname.rfind("image_", 0) == 0 && entry.path().extension() == ".ppm") names.push_back(fname);
  }
  std::sort(names.begin(), names.end());
  std::vector<LabeledImage> out;
  for (const auto& name : names) {
    const std::string id = name.substr(6, name.size() - 6 - 4);
    LabeledImage li;
    li.name = id;
    li.image = ppm_read(dir / name);
    li.mask = pgm_read(dir / ("mask_" + id + ".pgm"));
    if (li.image.channels != 3 || li.image.height != li.mask.height ||
        li.image.width != li.mask.width) {
      throw DimensionError("image/mask geometry mismatch for " + (dir / name).string());
    }
    out.push_back(std::move(li));
  }
  if (out.empty()) throw IoError("split directory has no image_*.ppm files: " + dir.string());
  return out;
}

}  // namespace fanet
