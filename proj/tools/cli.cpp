#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <ostream>

#include "fanet/checkpoint.hpp"
#include "fanet/enhance.hpp"
#include "fanet/error.hpp"
#include "fanet/grad_suites.hpp"
#include "fanet/image.hpp"
#include "fanet/metrics.hpp"
#include "fanet/synth.hpp"
#include "fanet/train.hpp"
#include "run_config.hpp"

namespace fanet::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kGradTolerance = 1e-4;

// Flags common to every subcommand plus the per-command overrides. Values
// stay empty unless given so the config file keeps precedence below them.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, out, checkpoint, input, split;
  std::optional<std::size_t> n_train, n_val, n_test, size, iters, stage;
  std::optional<double> lr, c, alpha, beta, gamma;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> dump_masks;
  bool no_scm = false, no_frm_high = false, no_frm_low = false;
  bool box_filter = false;
  std::string scope;
};

RunConfig resolve(const Flags& f, const std::optional<fs::path>& fallback_config = std::nullopt) {
  RunConfig c;
  if (!f.config.empty()) {
    c = load_run_config(f.config);
  } else if (fallback_config && fs::exists(*fallback_config)) {
    c = load_run_config(*fallback_config);
  }
  if (f.data) c.data_dir = *f.data;
  if (f.out) c.out_dir = *f.out;
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.input) c.input = *f.input;
  if (f.split) c.split = *f.split;
  if (f.stage) c.stage = *f.stage;
  if (f.n_train) c.n_train = *f.n_train;
  if (f.n_val) c.n_val = *f.n_val;
  if (f.n_test) c.n_test = *f.n_test;
  if (f.size) c.scene.size = *f.size;
  if (f.iters) c.train.max_iters = *f.iters;
  if (f.lr) c.train.base_lr = *f.lr;
  if (f.seeds) c.seeds = *f.seeds;
  if (f.c) c.enhance.c = *f.c;
  if (f.alpha) c.enhance.alpha = *f.alpha;
  if (f.beta) c.enhance.beta = *f.beta;
  if (f.gamma) c.enhance.gamma = *f.gamma;
  if (f.no_scm) c.model.scm_enabled = false;
  if (f.no_frm_high) c.model.frm_high_freq = false;
  if (f.no_frm_low) c.model.frm_low_freq = false;
  c.validate();
  return c;
}

void require(const std::string& value, const std::string& what) {
  if (value.empty()) throw ValidationError("missing required " + what);
}

fs::path make_out_dir(const RunConfig& c) {
  require(c.out_dir, "--out");
  fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---- gen-data --------------------------------------------------------------

int cmd_gen_data(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  if (f.seed) c.scene.seed = *f.seed;
  c.validate();
  const fs::path dir = make_out_dir(c);
  const auto summary = generate_split(c.scene, c.n_train, c.n_val, c.n_test, dir);
  write_run_config(dir / "config.json", c);
  out << "train: " << summary.train << "\nval: " << summary.val << "\ntest: " << summary.test << "\n";
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

std::vector<LabeledImage> load_named_split(const RunConfig& c, const std::string& split) {
  require(c.data_dir, "--data");
  return load_split(fs::path(c.data_dir) / split);
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  if (f.seed) c.train.seed = *f.seed;
  const auto data = load_named_split(c, "train");
  const fs::path dir = make_out_dir(c);
  write_run_config(dir / "config.json", c);
  SegModel<float> model(c.model, c.head, c.train.seed);
  out << "training " << model.parameter_count() << " parameters on " << data.size() << " images for "
      << c.train.max_iters << " iterations\n";
  const auto result = train(model, data, c.train, c.head.ignore_index, dir);
  const double final_loss = result.curve.empty() ? 0.0 : result.curve.back().loss;
  out << "final loss " << fixed(final_loss, 6) << "\n";
  out << "wrote " << (dir / "model.fant").string() << "\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

void print_report(const MetricsReport& r, std::ostream& out) {
  out << std::left << std::setw(10) << "class" << std::right << std::setw(10) << "IoU" << "\n";
  for (std::size_t k = 0; k < r.per_class_iou.size(); ++k) {
    out << std::left << std::setw(10) << k << std::right << std::setw(10)
        << (r.per_class_iou[k] ? fixed(*r.per_class_iou[k]) : std::string("n/a")) << "\n";
  }
  out << std::left << std::setw(10) << "mIoU" << std::right << std::setw(10) << fixed(r.miou) << "\n";
  out << std::left << std::setw(10) << "pixel_acc" << std::right << std::setw(10) << fixed(r.pixel_acc) << "\n";
}

SegModel<float> load_model(const RunConfig& c) {
  SegModel<float> model(c.model, c.head, c.train.seed);
  model.load_state_dict(load_checkpoint(c.checkpoint));
  return model;
}

std::optional<fs::path> sibling_config(const std::optional<std::string>& checkpoint) {
  if (!checkpoint) return std::nullopt;
  return fs::path(*checkpoint).parent_path() / "config.json";
}

void require_checkpoint(const RunConfig& c) {
  require(c.checkpoint, "--checkpoint");
  if (!fs::is_regular_file(c.checkpoint)) throw IoError("checkpoint not found: " + c.checkpoint);
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (f.checkpoint && !fs::is_regular_file(*f.checkpoint)) throw IoError("checkpoint not found: " + *f.checkpoint);
  const RunConfig c = resolve(f, sibling_config(f.checkpoint));
  require_checkpoint(c);
  const SegModel<float> model = load_model(c);
  const auto split = load_named_split(c, c.split);
  std::vector<LabelMap> preds;
  const auto report = evaluate(model, split, c.head.ignore_index, f.dump_masks ? &preds : nullptr);
  print_report(report, out);

  const fs::path report_path = c.out_dir.empty()
                                   ? fs::path(c.checkpoint).parent_path() / ("metrics_" + c.split + ".json")
                                   : make_out_dir(c) / ("metrics_" + c.split + ".json");
  write_file(report_path, metrics_to_json(report).dump(2) + "\n");
  fs::path config_path = report_path;
  config_path.replace_extension(".config.json");
  write_run_config(config_path, c);
  out << "wrote " << report_path.string() << "\n";

  if (f.dump_masks) {
    const fs::path mask_dir(*f.dump_masks);
    fs::create_directories(mask_dir);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      pgm_write(mask_dir / ("mask_" + split[i].name + ".pgm"), preds[i]);
    }
    out << "wrote " << preds.size() << " predicted masks to " << mask_dir.string() << "\n";
  }
  return kExitOk;
}

// ---- ablate ----------------------------------------------------------------

int cmd_ablate(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  const auto train_split = load_named_split(c, "train");
  const auto val_split = load_named_split(c, "val");
  const fs::path dir = make_out_dir(c);
  write_run_config(dir / "config.json", c);

  AblationSetup setup;
  setup.model = c.model;
  setup.head = c.head;
  setup.train = c.train;
  setup.seeds = c.seeds;
  setup.threads = thread_cap();
  const auto rows = run_ablation(standard_ablation_grid(), setup, train_split, val_split);
  const std::string csv = ablation_csv(rows);
  write_file(dir / "ablation.csv", csv);

  json runs = json::array();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.runs.size(); ++i) {
      runs.push_back({{"config", row.config}, {"seed", c.seeds[i]}, {"metrics", metrics_to_json(row.runs[i])}});
    }
  }
  write_file(dir / "ablation_runs.json", runs.dump(2) + "\n");

  out << std::left << std::setw(12) << "config" << std::right << std::setw(20) << "mIoU" << std::setw(20)
      << "pixel_acc" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.config << std::right << std::setw(20)
        << (fixed(r.miou_mean) + " +- " + fixed(r.miou_std)) << std::setw(20)
        << (fixed(r.pixacc_mean) + " +- " + fixed(r.pixacc_std)) << "\n";
  }
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  const auto entries = gradcheck_scope(f.scope);
  bool ok = true;
  json report = json::array();
  for (const auto& e : entries) {
    const bool pass = e.max_relative_error < kGradTolerance;
    ok = ok && pass;
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %12.3e  %s\n", e.name.c_str(), e.max_relative_error,
                  pass ? "ok" : "FAIL");
    out << line;
    report.push_back({{"name", e.name}, {"max_relative_error", e.max_relative_error}, {"coordinates", e.coordinates}});
  }
  if (f.out) {
    RunConfig c;
    c.out_dir = *f.out;
    const fs::path dir = make_out_dir(c);
    write_file(dir / ("gradcheck_" + f.scope + ".json"), report.dump(2) + "\n");
  }
  out << (ok ? "all below " : "some at or above ") << kGradTolerance << "\n";
  if (!ok) throw NumericalError("gradient check exceeded tolerance " + std::to_string(kGradTolerance));
  return kExitOk;
}

// ---- enhance ---------------------------------------------------------------

// Maps a signed map in [-gamma/2, gamma/2] to [0, 1] for display.
Image signed_to_display(const Image& m, double gamma) {
  Image d = m;
  for (auto& v : d.pixels) v = gamma > 0.0 ? std::clamp(v / gamma + 0.5, 0.0, 1.0) : 0.5;
  return d;
}

Image clamped(Image img) {
  for (auto& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
  return img;
}

int cmd_enhance(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  require(c.input, "--in");
  const Image img = ppm_read(c.input);
  const fs::path dir = make_out_dir(c);
  const auto& p = c.enhance;
  const std::string ext = img.channels == 3 ? ".ppm" : ".pgm";
  ppm_write(dir / ("sharpened" + ext), clamped(sharpen(img, p.c)));
  ppm_write(dir / ("contrast_map" + ext), signed_to_display(contrast_map(img, p), p.gamma));
  ppm_write(dir / ("contrast" + ext), signed_to_display(contrast_enhance(img, p), p.gamma));
  ppm_write(dir / ("combined" + ext), enhance_combine(img, p));
  write_run_config(dir / "config.json", c);
  out << "wrote sharpened, contrast_map, contrast, combined to " << dir.string() << "\n";
  return kExitOk;
}

// ---- dump-features ---------------------------------------------------------

// Channel mean of |x| for batch item 0, min-max normalized to [0, 1].
Image heatmap(const Tensor<float>& t, double* lo, double* hi) {
  const std::size_t ch = t.dim(1), h = t.dim(2), w = t.dim(3);
  Image img(h, w, 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t c = 0; c < ch; ++c) acc += std::abs(static_cast<double>(t.at(0, c, y, x)));
      img.at(y, x) = acc / static_cast<double>(ch);
    }
  }
  const auto [mn, mx] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  *lo = *mn;
  *hi = *mx;
  const double range = *hi - *lo;
  for (auto& v : img.pixels) v = range > 0.0 ? (v - *lo) / range : 0.0;
  return img;
}

int cmd_dump_features(const Flags& f, std::ostream& out) {
  if (f.checkpoint && !fs::is_regular_file(*f.checkpoint)) throw IoError("checkpoint not found: " + *f.checkpoint);
  RunConfig c = resolve(f, sibling_config(f.checkpoint));
  require_checkpoint(c);
  require(c.input, "--in");
  if (!c.model.frm_enabled()) throw ValidationError("stage has no FRM (stage " + std::to_string(c.stage) + ")");
  SegModel<float> model = load_model(c);
  if (f.box_filter) {
    for (auto& block : model.backbone().stage(c.stage - 1)) {
      if (block.frm) freeze_box_filter(*block.frm);
    }
  }
  Image img = ppm_read(c.input);
  if (img.channels == 1) {
    Image rgb(img.height, img.width, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      for (std::size_t ch = 0; ch < 3; ++ch) rgb.pixels[i * 3 + ch] = img.pixels[i];
    img = std::move(rgb);
  }
  typename Backbone<float>::Tap tap;
  tap.stage = c.stage;
  {
    NoGradGuard guard;
    model.forward(image_to_tensor(img), &tap);
  }
  if (!tap.captured) throw ValidationError("stage has no FRM (stage " + std::to_string(c.stage) + ")");

  const fs::path dir = make_out_dir(c);
  json meta;
  meta["reduction"] = "channel mean of absolute values, min-max normalized per map";
  meta["stage"] = c.stage;
  meta["box_filter"] = f.box_filter;
  std::vector<std::string> written;
  for (const auto& [name, t] : {std::pair<std::string, const Tensor<float>*>{"f", &tap.trace.f},
                                {"r", &tap.trace.r},
                                {"s", &tap.trace.s},
                                {"fbar", &tap.trace.out}}) {
    if (!t->defined()) continue;
    double lo = 0.0, hi = 0.0;
    const Image map = heatmap(*t, &lo, &hi);
    LabelMap pgm(map.height, map.width);
    for (std::size_t i = 0; i < map.pixels.size(); ++i) pgm.labels[i] = quantize_unit(map.pixels[i]);
    pgm_write(dir / (name + ".pgm"), pgm);
    meta["maps"][name] = {{"min", lo}, {"max", hi}, {"shape", t->shape()}};
    written.push_back(name + ".pgm");
  }
  write_file(dir / "features.json", meta.dump(2) + "\n");
  write_run_config(dir / "config.json", c);
  out << "wrote";
  for (const auto& w : written) out << " " << w;
  out << " to " << dir.string() << "\n";
  return kExitOk;
}

void add_config(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config; flags override its values")->check(CLI::ExistingFile);
}

}  // namespace

std::size_t thread_cap() {
  const char* env = std::getenv("FANET_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ValidationError(std::string("FANET_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FANet desk-scale segmentation toolkit", "fanet"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic cluttered-scene dataset");
  add_config(gen, f);
  gen->add_option("--seed", f.seed, "Scene generator seed");
  gen->add_option("--out", f.out, "Output directory");
  gen->add_option("--train", f.n_train, "Training scenes");
  gen->add_option("--val", f.n_val, "Validation scenes");
  gen->add_option("--test", f.n_test, "Test scenes");
  gen->add_option("--size", f.size, "Image side in pixels");

  auto* tr = app.add_subcommand("train", "Train a model on a generated dataset");
  add_config(tr, f);
  tr->add_option("--data", f.data, "Dataset directory (with train/)");
  tr->add_option("--out", f.out, "Output directory");
  tr->add_option("--seed", f.seed, "Initialization and data-order seed");
  tr->add_option("--iters", f.iters, "Training iterations");
  tr->add_option("--lr", f.lr, "Base learning rate");
  tr->add_flag("--no-scm", f.no_scm, "Disable the spatial context module");
  tr->add_flag("--no-frm-high", f.no_frm_high, "Disable the FRM high-frequency branch");
  tr->add_flag("--no-frm-low", f.no_frm_low, "Disable the FRM low-frequency branch");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_config(ev, f);
  ev->add_option("--checkpoint", f.checkpoint, "Checkpoint (.fant)");
  ev->add_option("--data", f.data, "Dataset directory");
  ev->add_option("--split", f.split, "Split name")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--out", f.out, "Report directory (default: next to the checkpoint)");
  ev->add_option("--dump-masks", f.dump_masks, "Directory for predicted mask PGMs");

  auto* ab = app.add_subcommand("ablate", "Run the SCM/FRM ablation grid");
  add_config(ab, f);
  ab->add_option("--data", f.data, "Dataset directory (with train/ and val/)");
  ab->add_option("--out", f.out, "Output directory");
  ab->add_option("--seeds", f.seeds, "Seeds, comma separated")->delimiter(',');
  ab->add_option("--iters", f.iters, "Training iterations per run");
  ab->add_flag("--no-scm", f.no_scm, "Disable SCM in the base configuration");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--scope", f.scope, "ops, block or model")->required()->check(CLI::IsMember({"ops", "block", "model"}));
  gc->add_option("--out", f.out, "Optional directory for a JSON report");

  auto* en = app.add_subcommand("enhance", "Classical sharpening and contrast enhancement");
  add_config(en, f);
  en->add_option("--in", f.input, "Input PPM/PGM image");
  en->add_option("--out", f.out, "Output directory");
  en->add_option("--c", f.c, "Laplacian centre coefficient");
  en->add_option("--alpha", f.alpha, "Contrast slope");
  en->add_option("--beta", f.beta, "Contrast midpoint");
  en->add_option("--gamma", f.gamma, "Contrast strength");

  auto* df = app.add_subcommand("dump-features", "Write FRM feature heatmaps for one image");
  add_config(df, f);
  df->add_option("--checkpoint", f.checkpoint, "Checkpoint (.fant)");
  df->add_option("--in", f.input, "Input PPM image (sides divisible by 32)");
  df->add_option("--stage", f.stage, "Stage (1-4) whose first FRM is captured");
  df->add_option("--out", f.out, "Output directory");
  df->add_flag("--box-filter", f.box_filter, "Freeze the FRM down-filter to a 2x2 box average");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f, out);
    if (tr->parsed()) return cmd_train(f, out);
    if (ev->parsed()) return cmd_eval(f, out);
    if (ab->parsed()) return cmd_ablate(f, out);
    if (gc->parsed()) return cmd_gradcheck(f, out);
    if (en->parsed()) return cmd_enhance(f, out);
    if (df->parsed()) return cmd_dump_features(f, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace fanet::cli
