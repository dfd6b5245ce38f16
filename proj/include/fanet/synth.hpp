#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fanet/image.hpp"

namespace fanet {

/// Parameters of the procedural cluttered-scene generator. Scenes contain
/// a textured background (class 0) and objects of classes 1..4 that may be
/// alpha-blended (translucent) and vary widely in scale.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t size = 64;
  std::size_t num_classes = 5;
  std::size_t objects_min = 3;
  std::size_t objects_max = 8;
  double translucent_fraction = 0.4;
  double alpha_min = 0.2;
  double alpha_max = 0.6;
  double scale_min = 0.1;  // object diameter as a fraction of the image side
  double scale_max = 0.6;
  std::size_t clutter_patches = 20;

  void validate() const;
};

enum class ShapeKind { ellipse, rectangle, polygon };

const char* shape_kind_name(ShapeKind kind);

struct ObjectMeta {
  int class_id = 1;
  ShapeKind kind = ShapeKind::ellipse;
  double center_x = 0.0;  // pixel units; pixel (x, y) is sampled at (x + 0.5, y + 0.5)
  double center_y = 0.0;
  double scale = 0.0;     // diameter / image side
  double radius_x = 0.0;  // half extents along the rotated axes
  double radius_y = 0.0;
  double angle = 0.0;
  std::vector<std::array<double, 2>> polygon;  // absolute vertices, polygon kind only
  std::array<double, 3> color{};
  bool translucent = false;
  double alpha = 1.0;  // 1 for opaque objects

  bool contains(double x, double y) const;
};

struct SceneSample {
  Image image;  // H x W x 3
  LabelMap mask;
  std::vector<ObjectMeta> objects;  // back to front
};

/// Draws `objects` over `background` back to front. Translucent objects are
/// composited as alpha * colour + (1 - alpha) * below; every object owns its
/// mask pixels regardless of opacity.
SceneSample compose_scene(Image background, std::vector<ObjectMeta> objects);

/// Fully determined by (spec.seed, index).
SceneSample generate_scene(const SceneSpec& spec, std::uint64_t index);

struct SplitSummary {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Writes train/, val/, test/ with image_XXXX.ppm / mask_XXXX.pgm pairs
/// (global, disjoint indices) plus manifest.json.
SplitSummary generate_split(const SceneSpec& spec, std::size_t n_train, std::size_t n_val,
                            std::size_t n_test, const std::filesystem::path& out_dir);

struct LabeledImage {
  std::string name;
  Image image;
  LabelMap mask;
};

/// Loads every image_*.ppm / mask_*.pgm pair in a split directory, sorted by name.
std::vector<LabeledImage> load_split(const std::filesystem::path& dir);

}  // namespace fanet
