// Acceptance suite: one PASS/FAIL line per primary criterion.
//
//   fanet_acceptance [--work DIR] [--only name,name,...] [--report FILE]

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "fanet/backbone.hpp"
#include "fanet/enhance.hpp"
#include "fanet/grad_suites.hpp"
#include "fanet/image.hpp"
#include "fanet/metrics.hpp"
#include "fanet/optim.hpp"
#include "fanet/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fanet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

std::string fix(double v, int d = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(d) << v;
  return s.str();
}

int cli_run(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run_cli(args, o, e);
  if (out) *out = o.str();
  if (code != 0) {
    std::cerr << "fanet";
    for (const auto& a : args) std::cerr << " " << a;
    std::cerr << " -> exit " << code << "\n" << e.str();
  }
  return code;
}

// ---- gradient fidelity ------------------------------------------------------

Outcome gradient_fidelity(const fs::path&) {
  // Gate on process CPU time so a busy machine does not fail a single-core budget.
  const auto t0 = Clock::now();
  const std::clock_t c0 = std::clock();
  const auto entries = gradcheck_model();
  const double cpu = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_relative_error);
  return {worst < 1e-4 && cpu < 120.0, "model max rel err " + sci(worst) + " (< 1e-4), " + fix(cpu, 1) +
                                            " s CPU (< 120 s), " + fix(secs, 1) + " s wall"};
}

// ---- convolution oracle -----------------------------------------------------

Outcome conv_oracle(const fs::path&) {
  Rng rng(0xc0417);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t groups = 1 + rng.below(4);
    const std::size_t in = groups * (1 + rng.below(3));
    const std::size_t out = groups * (1 + rng.below(3));
    const std::size_t k = 1 + rng.below(7);
    const std::size_t stride = 1 + rng.below(3);
    const std::size_t pad = rng.below(k / 2 + 2);
    const std::size_t h = k + rng.below(9), w = k + rng.below(9);
    const bool bias = rng.below(2) == 0;
    auto spec = ConvSpec<double>::create(in, out, k, stride, pad, groups, bias);
    Rng wr(1000 + trial);
    oracle::fill_uniform(spec.weight, wr);
    if (bias) oracle::fill_uniform(spec.bias, wr);
    const auto x = oracle::random_tensor<double>(Shape{1 + rng.below(2), in, h, w}, 5000 + trial);
    const auto y = conv2d(x, spec);
    const auto ref = oracle::direct_conv(x, spec);
    if (y.numel() != ref.size()) return {false, "shape mismatch in trial " + std::to_string(trial)};
    worst = std::max(worst, oracle::max_abs_diff(y.data(), ref));
  }
  return {worst < 1e-10, "50 configurations, max abs diff " + sci(worst) + " (< 1e-10)"};
}

// ---- FRM frequency separation -----------------------------------------------

double max_abs(const Tensor<double>& t, std::size_t margin = 0) {
  double m = 0.0;
  for (std::size_t n = 0; n < t.dim(0); ++n)
    for (std::size_t c = 0; c < t.dim(1); ++c)
      for (std::size_t y = margin; y + margin < t.dim(2); ++y)
        for (std::size_t x = margin; x + margin < t.dim(3); ++x) m = std::max(m, std::abs(t.at(n, c, y, x)));
  return m;
}

Outcome frm_separation(const fs::path&) {
  auto state = FRMState<double>::create(8, true, true);
  Rng rng(0xf7);
  state.init(rng);
  freeze_box_filter(state);

  double r_const = 0.0;
  for (double level : {-1.3, 0.25, 0.9}) {
    FRMTrace<double> tr;
    frm_forward(Tensor<double>(Shape{1, 8, 16, 16}, level), state, &tr);
    r_const = std::max(r_const, max_abs(tr.r));
  }
  double s_checker = 0.0, r_checker = 0.0;
  for (std::size_t n : {8u, 16u, 24u}) {
    Tensor<double> x(Shape{1, 8, n, n});
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t w = 0; w < n; ++w) x.at(0, c, y, w) = (y + w) % 2 ? -1.0 : 1.0;
    FRMTrace<double> tr;
    frm_forward(x, state, &tr);
    s_checker = std::max(s_checker, max_abs(tr.s, 1));
    r_checker = std::max(r_checker, max_abs(tr.r, 1));
  }
  return {r_const < 1e-6 && s_checker < 1e-6,
          "constant ||R||inf " + sci(r_const) + ", checkerboard interior ||S||inf " + sci(s_checker) +
              " (both < 1e-6; checkerboard ||R||inf " + fix(r_checker, 3) + ")"};
}

// ---- shape contract ---------------------------------------------------------

Outcome shape_contract(const fs::path&) {
  Rng rng(0x5a);
  const Backbone<float> bb(FANetConfig{}, rng);
  std::string detail;
  bool ok = true;
  for (std::size_t side : {512u, 64u}) {
    NoGradGuard guard;
    const auto feats = bb.forward(Tensor<float>(Shape{1, 3, side, side}, 0.5f));
    detail += std::to_string(side) + ":";
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t expect = side / (4u << s);
      ok = ok && feats[s].dim(2) == expect && feats[s].dim(3) == expect;
      detail += " " + std::to_string(feats[s].dim(2));
    }
    detail += side == 512 ? "; " : "";
  }
  return {ok, detail + " (expected 128/64/32/16 and 16/8/4/2)"};
}

// ---- classical enhancement identities ---------------------------------------

double max_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

Outcome enhance_identities(const fs::path&) {
  double worst_const = 0.0;
  for (double level : {0.0, 0.37, 1.0})
    for (double c : {0.5, 1.0, 2.0}) {
      const Image f(11, 13, 3, level);
      worst_const = std::max(worst_const, max_diff(sharpen(f, c), f));
    }

  EnhanceParams p;
  double q_at_beta = 0.0;
  for (double beta : {0.2, 0.5, 0.8}) {
    p.beta = beta;
    Image f(6, 6, 3, beta);
    f.at(0, 0, 0) = 0.9;  // one off-beta pixel so the map is not trivially flat
    const Image q = contrast_enhance(f, p);
    for (std::size_t i = 1; i < f.pixels.size(); ++i) q_at_beta = std::max(q_at_beta, std::abs(q.pixels[i]));
  }

  EnhanceParams id;
  id.c = 0.0;
  id.gamma = 0.0;
  const Image scene = generate_scene(SceneSpec{}, 1).image;
  const double combine_id = max_diff(enhance_combine(scene, id), scene);

  const bool ok = worst_const < 1e-12 && q_at_beta < 1e-12 && combine_id < 1e-12;
  return {ok, "constant sharpen " + sci(worst_const) + ", q at beta " + sci(q_at_beta) + ", combined(c=0,gamma=0) " +
                  sci(combine_id) + " (all < 1e-12)"};
}

// ---- optimizer / schedule ---------------------------------------------------

Outcome optimizer_schedule(const fs::path&) {
  double worst = 0.0;
  for (double wd : {0.0, 0.05}) {
    TrainConfig cfg;
    cfg.weight_decay = wd;
    Rng rng(0xada);
    const std::size_t n = 5;
    std::vector<double> p(n), m(n, 0.0), v(n, 0.0), g(n);
    for (auto& x : p) x = rng.uniform(-2.0, 2.0);
    std::vector<double> ref = p, rm(n, 0.0), rv(n, 0.0);
    for (std::uint64_t t = 1; t <= 100; ++t) {
      const double lr = 5e-3;
      for (std::size_t i = 0; i < n; ++i) g[i] = std::cos(0.3 * t + i) + 0.5 * p[i];
      adamw_update<double>(p, g, m, v, t, lr, cfg);
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = std::cos(0.3 * t + i) + 0.5 * ref[i];
        ref[i] -= lr * wd * ref[i];
        rm[i] = 0.9 * rm[i] + 0.1 * gi;
        rv[i] = 0.999 * rv[i] + 0.001 * gi * gi;
        const double mh = rm[i] / (1.0 - std::pow(0.9, static_cast<double>(t)));
        const double vh = rv[i] / (1.0 - std::pow(0.999, static_cast<double>(t)));
        ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      }
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(p[i] - ref[i]));
    }
  }
  const TrainConfig cfg;
  const double lr0 = poly_lr(0, cfg), lr_end = poly_lr(cfg.max_iters, cfg);
  const bool ok = worst < 1e-12 && lr0 == 9e-5 && lr_end == 0.0;
  return {ok, "AdamW vs scalar reference (100 steps, wd 0 and 0.05) " + sci(worst) + " (< 1e-12); poly_lr(0)=" +
                  sci(lr0) + ", poly_lr(max)=" + sci(lr_end)};
}

// ---- metric oracle ----------------------------------------------------------

Outcome metric_oracle(const fs::path&) {
  const auto two = metrics_from_confusion(ConfusionMatrix(2, {3, 1, 1, 3}));
  double err = std::abs(two.miou - 0.6) + std::abs(two.pixel_acc - 0.75) + std::abs(*two.per_class_iou[0] - 0.6) +
               std::abs(*two.per_class_iou[1] - 0.6);
  // rows: truth 0..2 = {5,1,0},{2,3,1},{0,0,4}
  // IoU0 = 5/(5+1+2), IoU1 = 3/(3+2+1+1), IoU2 = 4/(4+1)
  const auto three = metrics_from_confusion(ConfusionMatrix(3, {5, 1, 0, 2, 3, 1, 0, 0, 4}));
  const double i0 = 5.0 / 8.0, i1 = 3.0 / 7.0, i2 = 4.0 / 5.0;
  err += std::abs(*three.per_class_iou[0] - i0) + std::abs(*three.per_class_iou[1] - i1) +
         std::abs(*three.per_class_iou[2] - i2) + std::abs(three.miou - (i0 + i1 + i2) / 3.0) +
         std::abs(three.pixel_acc - 12.0 / 16.0);
  // Classes absent from both prediction and truth drop out of the mean.
  ConfusionMatrix absent(5);
  const std::vector<std::uint8_t> zeros(10, 0);
  absent.add(zeros, zeros, 255);
  const auto a = metrics_from_confusion(absent);
  const bool excluded = !a.per_class_iou[1] && !a.per_class_iou[4] && a.miou == 1.0 && a.pixel_acc == 1.0;
  return {err < 1e-12 && excluded, "2x2 [[3,1],[1,3]] mIoU " + fix(two.miou, 6) + " pix acc " +
                                       fix(two.pixel_acc, 6) + "; summed abs err " + sci(err) +
                                       "; absent-class exclusion " + (excluded ? "ok" : "wrong")};
}

// ---- desk-scale learning and ablation ---------------------------------------

const fs::path& desk_data(const fs::path& work) {
  static const fs::path dir = [&] {
    const fs::path d = work / "desk_data";
    if (!fs::exists(d / "manifest.json")) {
      if (cli_run({"gen-data", "--seed", "7", "--out", d.string(), "--train", "200", "--val", "40", "--test", "60"}) != 0)
        throw std::runtime_error("gen-data failed");
    }
    return d;
  }();
  return dir;
}

double majority_fraction(const std::vector<LabeledImage>& split) {
  std::map<int, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& s : split)
    for (auto v : s.mask.labels) {
      ++counts[v];
      ++total;
    }
  std::size_t best = 0;
  for (const auto& [k, n] : counts) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(total);
}

double mean_loss(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += v[i];
  return acc / static_cast<double>(end - begin);
}

Outcome desk_learning(const fs::path& work) {
  const fs::path data = desk_data(work);
  const fs::path run = work / "desk_run";
  fs::remove_all(run);
  const auto t0 = Clock::now();
  if (cli_run({"train", "--data", data.string(), "--out", run.string(), "--seed", "0"}) != 0)
    return {false, "train failed"};
  const double secs = seconds_since(t0);
  if (cli_run({"eval", "--checkpoint", (run / "model.fant").string(), "--split", "val"}) != 0)
    return {false, "eval failed"};
  const auto report = metrics_from_json(nlohmann::json::parse(read_file(run / "metrics_val.json")));
  const double majority = majority_fraction(load_split(data / "val"));

  std::vector<double> losses;
  std::istringstream csv(read_file(run / "loss.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) losses.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  const double first = mean_loss(losses, 0, 100), last = mean_loss(losses, losses.size() - 100, losses.size());

  const bool ok = report.miou >= 0.50 && report.pixel_acc >= majority && secs < 1800.0;
  return {ok, "val mIoU " + fix(report.miou) + " (>= 0.50), pix acc " + fix(report.pixel_acc) + " (majority " +
                  fix(majority) + "), train " + fix(secs, 0) + " s (< 1800 s); loss first/last 100 " + fix(first) +
                  " / " + fix(last) + " (drop " + fix(100.0 * (1.0 - last / first), 1) + "%)"};
}

Outcome ablation_direction(const fs::path& work) {
  const fs::path data = desk_data(work);
  const fs::path out = work / "ablation";
  fs::remove_all(out);
  const auto t0 = Clock::now();
  std::string table;
  if (cli_run({"ablate", "--data", data.string(), "--out", out.string(), "--seeds", "0,1,2"}, &table) != 0)
    return {false, "ablate failed"};
  std::cout << table;
  std::map<std::string, double> mean;
  std::istringstream csv(read_file(out / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    mean[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  for (const char* k : {"baseline", "+frm_high", "+frm_low", "+frm_both", "full"})
    if (!mean.count(k)) return {false, std::string("ablation.csv lacks row ") + k};
  const bool full_vs_base = mean["full"] >= mean["baseline"];
  const bool both_vs_single = mean["+frm_both"] >= mean["+frm_high"] && mean["+frm_both"] >= mean["+frm_low"];
  return {full_vs_base && both_vs_single,
          "mean val mIoU over seeds 0,1,2: full " + fix(mean["full"]) + " vs baseline " + fix(mean["baseline"]) +
              (full_vs_base ? " ok" : " VIOLATED") + "; +frm_both " + fix(mean["+frm_both"]) + " vs +frm_high " +
              fix(mean["+frm_high"]) + " / +frm_low " + fix(mean["+frm_low"]) + (both_vs_single ? " ok" : " VIOLATED") +
              "; " + fix(seconds_since(t0) / 60.0, 1) + " min"};
}

// ---- determinism ------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  return files;
}

Outcome determinism(const fs::path& work) {
  const fs::path root = work / "determinism";
  const fs::path data = root / "data", img = root / "scene.ppm", cfg = root / "tiny.json";
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"gen-data", {"gen-data", "--seed", "5", "--out", data.string(), "--train", "6", "--val", "2", "--test", "2"}},
      {"train", {"train", "--config", cfg.string(), "--data", data.string(), "--out", (root / "train").string(),
                 "--seed", "3"}},
      {"eval", {"eval", "--checkpoint", (root / "train" / "model.fant").string(), "--split", "val", "--out",
                (root / "eval").string(), "--dump-masks", (root / "eval" / "masks").string()}},
      {"ablate", {"ablate", "--config", cfg.string(), "--data", data.string(), "--out", (root / "ablate").string(),
                  "--seeds", "0,1"}},
      {"gradcheck", {"gradcheck", "--scope", "block", "--out", (root / "gradcheck").string()}},
      {"enhance", {"enhance", "--in", img.string(), "--out", (root / "enhance").string()}},
      {"dump-features", {"dump-features", "--checkpoint", (root / "train" / "model.fant").string(), "--in",
                         img.string(), "--out", (root / "features").string()}},
  };
  fs::remove_all(root);
  fs::create_directories(root);
  write_file(cfg, "{\"train\": {\"max_iters\": 20, \"eval_interval\": 10}}\n");
  ppm_write(img, generate_scene(SceneSpec{}, 99).image);

  std::vector<std::string> differing;
  for (const auto& [name, args] : commands) {
    const fs::path out = fs::path(args[std::find(args.begin(), args.end(), "--out") - args.begin() + 1]);
    if (cli_run(args) != 0) return {false, name + " failed"};
    const auto first = snapshot(out);
    fs::remove_all(out);
    if (cli_run(args) != 0) return {false, name + " failed on rerun"};
    if (snapshot(out) != first) differing.push_back(name);
  }
  std::string detail = std::to_string(commands.size()) + " subcommands run twice";
  if (differing.empty()) return {true, detail + ", all artifacts byte-identical"};
  detail += "; differing:";
  for (const auto& d : differing) detail += " " + d;
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FANet acceptance suite"};
  std::string work = (fs::temp_directory_path() / "fanet_acceptance").string();
  std::vector<std::string> only;
  std::string report_path;
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--report", report_path, "Also write the PASS/FAIL lines to this file");
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(const fs::path&)>>> criteria = {
      {"gradient-fidelity", gradient_fidelity},
      {"conv-oracle", conv_oracle},
      {"frm-frequency-separation", frm_separation},
      {"shape-contract", shape_contract},
      {"enhance-identities", enhance_identities},
      {"optimizer-schedule", optimizer_schedule},
      {"metric-oracle", metric_oracle},
      {"desk-learning", desk_learning},
      {"ablation-direction", ablation_direction},
      {"determinism", determinism},
  };

  fs::create_directories(work);
  std::ofstream report;
  if (!report_path.empty()) report.open(report_path, std::ios::trunc);
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
  };
  int failures = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = fn(work);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    emit((o.pass ? "PASS " : "FAIL ") + name + ": " + o.detail);
  }
  emit(std::to_string(ran - failures) + "/" + std::to_string(ran) + " criteria passed");
  return failures == 0 ? 0 : 1;
}
