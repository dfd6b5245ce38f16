#include "fanet/train.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "fanet/checkpoint.hpp"
#include "fanet/error.hpp"
#include "fanet/rng.hpp"

namespace fanet {

namespace {

// Network input range: [0, 1] pixels are centred to [-1, 1].
float input_value(double v) { return static_cast<float>(2.0 * v - 1.0); }

// Samples one training crop (with optional mirror) into the batch buffers.
void fill_crop(const LabeledImage& sample, std::size_t crop, std::size_t y0, std::size_t x0,
               bool flip, float* image_out, std::uint8_t* mask_out) {
  const auto& img = sample.image;
  const std::size_t plane = crop * crop;
  for (std::size_t y = 0; y < crop; ++y) {
    for (std::size_t x = 0; x < crop; ++x) {
      const std::size_t sx = x0 + (flip ? crop - 1 - x : x);
      const std::size_t sy = y0 + y;
      for (std::size_t c = 0; c < 3; ++c) {
        image_out[c * plane + y * crop + x] = input_value(img.at(sy, sx, c));
      }
      mask_out[y * crop + x] = sample.mask.at(sy, sx);
    }
  }
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::string ckpt_name(std::size_t iter) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%06zu.fant", iter);
  return buf;
}

}  // namespace

Tensor<float> image_to_tensor(const Image& image) {
  const std::size_t h = image.height, w = image.width, c = image.channels;
  std::vector<float> v(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) v[(ch * h + y) * w + x] = input_value(image.at(y, x, ch));
    }
  }
  return Tensor<float>(Shape{1, c, h, w}, std::move(v));
}

std::string loss_csv(const std::vector<LossRecord>& curve) {
  std::string out = "iter,lr,loss\n";
  char buf[96];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", r.iter, r.lr, r.loss);
    out += buf;
  }
  return out;
}

TrainResult train(SegModel<float>& model, const std::vector<LabeledImage>& data,
                  const TrainConfig& config, int ignore_index,
                  const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (data.empty()) throw ValidationError("train: dataset is empty");
  const std::size_t crop = config.crop;
  for (const auto& s : data) {
    if (s.image.height < crop || s.image.width < crop) {
      throw ValidationError("train: image " + s.name + " is smaller than the crop size");
    }
    for (const auto label : s.mask.labels) {
      if (label != ignore_index && label >= model.config().num_classes) {
        throw ValidationError("train: mask " + s.name + " has class id " + std::to_string(label) +
                              " but the model has " + std::to_string(model.config().num_classes) +
                              " classes");
      }
    }
  }
  if (out_dir) std::filesystem::create_directories(*out_dir);

  Rng rng(config.seed, 0x7261696eULL);
  AdamW<float> optimizer(config);
  const auto params = model.parameters();
  TrainResult result;
  std::vector<std::size_t> order = rng.permutation(data.size());
  std::size_t cursor = 0;
  const std::size_t bs = config.batch_size;

  auto save_last_good = [&] {
    if (out_dir) {
      save_checkpoint(*out_dir / "last_good.fant", model.state_dict());
      write_file(*out_dir / "loss.csv", loss_csv(result.curve));
    }
  };

  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    Tensor<float> images(Shape{bs, 3, crop, crop});
    std::vector<std::uint8_t> targets(bs * crop * crop);
    for (std::size_t b = 0; b < bs; ++b) {
      if (cursor == order.size()) {
        order = rng.permutation(data.size());
        cursor = 0;
      }
      const auto& sample = data[order[cursor++]];
      const auto y0 = static_cast<std::size_t>(rng.below(sample.image.height - crop + 1));
      const auto x0 = static_cast<std::size_t>(rng.below(sample.image.width - crop + 1));
      const bool flip = rng.bernoulli(0.5);
      fill_crop(sample, crop, y0, x0, flip, images.data().data() + b * 3 * crop * crop,
                targets.data() + b * crop * crop);
    }

    model.zero_grad();
    Tensor<float> loss = cross_entropy_loss(model.forward(images), targets, ignore_index);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      save_last_good();
      throw NumericalError("non-finite loss at iteration " + std::to_string(iter));
    }
    loss.backward();
    const double lr = poly_lr(iter, config);
    try {
      optimizer.step(params, lr);
    } catch (const NumericalError& e) {
      save_last_good();
      throw NumericalError(std::string(e.what()) + " at iteration " + std::to_string(iter));
    }
    result.curve.push_back({iter, lr, loss_value});

    if (out_dir && config.eval_interval > 0 && (iter + 1) % config.eval_interval == 0 &&
        iter + 1 < config.max_iters) {
      save_checkpoint(*out_dir / ckpt_name(iter + 1), model.state_dict());
    }
  }
  model.zero_grad();
  if (out_dir) {
    write_file(*out_dir / "loss.csv", loss_csv(result.curve));
    save_checkpoint(*out_dir / "model.fant", model.state_dict());
  }
  return result;
}

MetricsReport evaluate(const SegModel<float>& model, const std::vector<LabeledImage>& split,
                       int ignore_index, std::vector<LabelMap>* predictions) {
  if (split.empty()) throw ValidationError("evaluate: split is empty");
  NoGradGuard no_grad;
  ConfusionMatrix cm(model.config().num_classes);
  for (const auto& sample : split) {
    const Tensor<float> logits = model.forward(image_to_tensor(sample.image));
    const auto pred = argmax_classes(logits);
    cm.add(pred, sample.mask.labels, ignore_index);
    if (predictions) {
      LabelMap m(sample.mask.height, sample.mask.width);
      m.labels = pred;
      predictions->push_back(std::move(m));
    }
  }
  return metrics_from_confusion(cm);
}

std::vector<AblationVariant> standard_ablation_grid() {
  return {{"baseline", false, false, false}, {"+scm", true, false, false},
          {"+frm_high", false, true, false}, {"+frm_low", false, false, true},
          {"+frm_both", false, true, true},  {"full", true, true, true}};
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& grid,
                                      const AblationSetup& setup,
                                      const std::vector<LabeledImage>& train_split,
                                      const std::vector<LabeledImage>& val_split) {
  if (setup.seeds.empty()) throw ValidationError("ablation needs at least one seed");
  const std::size_t jobs = grid.size() * setup.seeds.size();
  std::vector<MetricsReport> reports(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        const auto& v = grid[j / setup.seeds.size()];
        const auto seed = setup.seeds[j % setup.seeds.size()];
        FANetConfig mc = setup.model;
        mc.scm_enabled = v.scm;
        mc.frm_high_freq = v.frm_high;
        mc.frm_low_freq = v.frm_low;
        TrainConfig tc = setup.train;
        tc.seed = seed;
        SegModel<float> model(mc, setup.head, seed);
        train(model, train_split, tc, setup.head.ignore_index);
        reports[j] = evaluate(model, val_split, setup.head.ignore_index);
        reports[j].iters_seen = tc.max_iters;
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(setup.threads, jobs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<AblationRow> rows;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    AblationRow row;
    row.config = grid[g].name;
    std::vector<double> mious, accs;
    for (std::size_t s = 0; s < setup.seeds.size(); ++s) {
      const auto& r = reports[g * setup.seeds.size() + s];
      row.runs.push_back(r);
      mious.push_back(r.miou);
      accs.push_back(r.pixel_acc);
    }
    for (double v : mious) row.miou_mean += v / static_cast<double>(mious.size());
    for (double v : accs) row.pixacc_mean += v / static_cast<double>(accs.size());
    row.miou_std = sample_std(mious, row.miou_mean);
    row.pixacc_std = sample_std(accs, row.pixacc_mean);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "config,miou_mean,miou_std,pixacc_mean,pixacc_std\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", r.config.c_str(), r.miou_mean,
                  r.miou_std, r.pixacc_mean, r.pixacc_std);
    out += buf;
  }
  return out;
}

}  // namespace fanet
