#include "run_config.hpp"

#include <functional>
#include <map>

#include "fanet/error.hpp"
#include "fanet/image.hpp"

namespace fanet::cli {
namespace {

using json = nlohmann::json;

// One setter per accepted key, so unknown keys are detected by lookup.
using Setter = std::function<void(RunConfig&, const json&)>;
using Section = std::map<std::string, Setter>;

template <typename T>
Setter field(T RunConfig::*member) {
  return [member](RunConfig& c, const json& v) { c.*member = v.get<T>(); };
}

template <typename S, typename T>
Setter nested(S RunConfig::*section, T S::*member) {
  return [section, member](RunConfig& c, const json& v) { (c.*section).*member = v.get<T>(); };
}

const std::map<std::string, Section>& schema() {
  static const std::map<std::string, Section> s = {
      {"ablation", {{"seeds", field(&RunConfig::seeds)}}},
      {"data",
       {{"alpha_max", nested(&RunConfig::scene, &SceneSpec::alpha_max)},
        {"alpha_min", nested(&RunConfig::scene, &SceneSpec::alpha_min)},
        {"clutter_patches", nested(&RunConfig::scene, &SceneSpec::clutter_patches)},
        {"n_test", field(&RunConfig::n_test)},
        {"n_train", field(&RunConfig::n_train)},
        {"n_val", field(&RunConfig::n_val)},
        {"num_classes", nested(&RunConfig::scene, &SceneSpec::num_classes)},
        {"objects_max", nested(&RunConfig::scene, &SceneSpec::objects_max)},
        {"objects_min", nested(&RunConfig::scene, &SceneSpec::objects_min)},
        {"scale_max", nested(&RunConfig::scene, &SceneSpec::scale_max)},
        {"scale_min", nested(&RunConfig::scene, &SceneSpec::scale_min)},
        {"seed", nested(&RunConfig::scene, &SceneSpec::seed)},
        {"size", nested(&RunConfig::scene, &SceneSpec::size)},
        {"translucent_fraction", nested(&RunConfig::scene, &SceneSpec::translucent_fraction)}}},
      {"enhance",
       {{"alpha", nested(&RunConfig::enhance, &EnhanceParams::alpha)},
        {"beta", nested(&RunConfig::enhance, &EnhanceParams::beta)},
        {"c", nested(&RunConfig::enhance, &EnhanceParams::c)},
        {"gamma", nested(&RunConfig::enhance, &EnhanceParams::gamma)}}},
      {"head",
       {{"fpn_channels", nested(&RunConfig::head, &HeadConfig::fpn_channels)},
        {"ignore_index", nested(&RunConfig::head, &HeadConfig::ignore_index)},
        {"num_classes", nested(&RunConfig::head, &HeadConfig::num_classes)},
        {"ppm_bins", nested(&RunConfig::head, &HeadConfig::ppm_bins)}}},
      {"model",
       {{"frm_high_freq", nested(&RunConfig::model, &FANetConfig::frm_high_freq)},
        {"frm_low_freq", nested(&RunConfig::model, &FANetConfig::frm_low_freq)},
        {"in_channels", nested(&RunConfig::model, &FANetConfig::in_channels)},
        {"mlp_ratio", nested(&RunConfig::model, &FANetConfig::mlp_ratio)},
        {"num_classes", nested(&RunConfig::model, &FANetConfig::num_classes)},
        {"scm_enabled", nested(&RunConfig::model, &FANetConfig::scm_enabled)},
        {"stage_channels", nested(&RunConfig::model, &FANetConfig::stage_channels)},
        {"stage_depths", nested(&RunConfig::model, &FANetConfig::stage_depths)}}},
      {"paths",
       {{"checkpoint", field(&RunConfig::checkpoint)},
        {"data", field(&RunConfig::data_dir)},
        {"input", field(&RunConfig::input)},
        {"out", field(&RunConfig::out_dir)},
        {"split", field(&RunConfig::split)},
        {"stage", field(&RunConfig::stage)}}},
      {"train",
       {{"base_lr", nested(&RunConfig::train, &TrainConfig::base_lr)},
        {"batch_size", nested(&RunConfig::train, &TrainConfig::batch_size)},
        {"beta1", nested(&RunConfig::train, &TrainConfig::beta1)},
        {"beta2", nested(&RunConfig::train, &TrainConfig::beta2)},
        {"crop", nested(&RunConfig::train, &TrainConfig::crop)},
        {"eps", nested(&RunConfig::train, &TrainConfig::eps)},
        {"eval_interval", nested(&RunConfig::train, &TrainConfig::eval_interval)},
        {"max_iters", nested(&RunConfig::train, &TrainConfig::max_iters)},
        {"poly_power", nested(&RunConfig::train, &TrainConfig::poly_power)},
        {"seed", nested(&RunConfig::train, &TrainConfig::seed)},
        {"weight_decay", nested(&RunConfig::train, &TrainConfig::weight_decay)}}},
  };
  return s;
}

}  // namespace

void RunConfig::validate() const {
  scene.validate();
  model.validate();
  head.validate();
  train.validate();
  enhance.validate();
  if (model.num_classes != head.num_classes || model.num_classes != scene.num_classes) {
    throw ConfigError("num_classes must agree across data, model and head sections");
  }
  if (seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
  if (stage < 1 || stage > 4) throw ConfigError("paths.stage must be in 1..4");
}

nlohmann::json to_json(const RunConfig& c) {
  json j;
  j["ablation"] = {{"seeds", c.seeds}};
  j["data"] = {{"alpha_max", c.scene.alpha_max},
               {"alpha_min", c.scene.alpha_min},
               {"clutter_patches", c.scene.clutter_patches},
               {"n_test", c.n_test},
               {"n_train", c.n_train},
               {"n_val", c.n_val},
               {"num_classes", c.scene.num_classes},
               {"objects_max", c.scene.objects_max},
               {"objects_min", c.scene.objects_min},
               {"scale_max", c.scene.scale_max},
               {"scale_min", c.scene.scale_min},
               {"seed", c.scene.seed},
               {"size", c.scene.size},
               {"translucent_fraction", c.scene.translucent_fraction}};
  j["enhance"] = {{"alpha", c.enhance.alpha}, {"beta", c.enhance.beta}, {"c", c.enhance.c}, {"gamma", c.enhance.gamma}};
  j["head"] = {{"fpn_channels", c.head.fpn_channels},
               {"ignore_index", c.head.ignore_index},
               {"num_classes", c.head.num_classes},
               {"ppm_bins", c.head.ppm_bins}};
  j["model"] = {{"frm_high_freq", c.model.frm_high_freq},
                {"frm_low_freq", c.model.frm_low_freq},
                {"in_channels", c.model.in_channels},
                {"mlp_ratio", c.model.mlp_ratio},
                {"num_classes", c.model.num_classes},
                {"scm_enabled", c.model.scm_enabled},
                {"stage_channels", c.model.stage_channels},
                {"stage_depths", c.model.stage_depths}};
  j["paths"] = {{"checkpoint", c.checkpoint}, {"data", c.data_dir}, {"input", c.input},
                {"out", c.out_dir},           {"split", c.split},    {"stage", c.stage}};
  j["train"] = {{"base_lr", c.train.base_lr},
                {"batch_size", c.train.batch_size},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"crop", c.train.crop},
                {"eps", c.train.eps},
                {"eval_interval", c.train.eval_interval},
                {"max_iters", c.train.max_iters},
                {"poly_power", c.train.poly_power},
                {"seed", c.train.seed},
                {"weight_decay", c.train.weight_decay}};
  return j;
}

void apply_json(RunConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  const auto& sections = schema();
  for (const auto& [section_name, body] : j.items()) {
    const auto sec = sections.find(section_name);
    if (sec == sections.end()) throw ConfigError("unknown config key '" + section_name + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section_name + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const auto setter = sec->second.find(key);
      const std::string path = section_name + "." + key;
      if (setter == sec->second.end()) throw ConfigError("unknown config key '" + path + "'");
      try {
        setter->second(config, value);
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
      }
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  apply_json(config, j);
  return config;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& config) {
  write_file(path, to_json(config).dump(2) + "\n");
}

}  // namespace fanet::cli
