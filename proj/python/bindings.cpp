#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "fanet/checkpoint.hpp"
#include "fanet/conv.hpp"
#include "fanet/enhance.hpp"
#include "fanet/error.hpp"
#include "fanet/grad_suites.hpp"
#include "fanet/metrics.hpp"
#include "fanet/optim.hpp"
#include "fanet/synth.hpp"
#include "fanet/train.hpp"
#include "run_config.hpp"

namespace py = pybind11;
using namespace fanet;

namespace {

using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// HxW or HxWxC float array <-> Image (interleaved channels).
Image to_image(const ImageArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("image must be HxW or HxWxC, got ndim " + std::to_string(a.ndim()));
  Image img(a.shape(0), a.shape(1), a.ndim() == 3 ? a.shape(2) : 1);
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

ImageArray from_image(const Image& img) {
  std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width)};
  if (img.channels != 1) shape.push_back(static_cast<py::ssize_t>(img.channels));
  ImageArray a(shape);
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

LabelArray from_labels(const LabelMap& m) {
  LabelArray a({m.height, m.width});
  std::copy(m.labels.begin(), m.labels.end(), a.mutable_data());
  return a;
}

EnhanceParams enhance_params(double c, double alpha, double beta, double gamma) {
  EnhanceParams p;
  p.c = c;
  p.alpha = alpha;
  p.beta = beta;
  p.gamma = gamma;
  p.validate();
  return p;
}

py::dict report_dict(const MetricsReport& r) {
  return py::module_::import("json").attr("loads")(metrics_to_json(r).dump());
}

// Inference wrapper: architecture from a run config, weights from a checkpoint.
class Model {
 public:
  Model(const std::string& config_json, const std::string& checkpoint) {
    cli::RunConfig cfg;
    if (!config_json.empty()) cli::apply_json(cfg, nlohmann::json::parse(config_json));
    cfg.validate();
    model_ = std::make_unique<SegModel<float>>(cfg.model, cfg.head, cfg.train.seed);
    if (!checkpoint.empty()) model_->load_state_dict(load_checkpoint(checkpoint));
    ignore_index_ = cfg.head.ignore_index;
  }

  std::size_t parameter_count() const { return model_->parameter_count(); }

  LabelArray predict(const ImageArray& image) const {
    const Image img = to_image(image);
    std::vector<LabelMap> preds;
    LabeledImage item{"py", img, LabelMap(img.height, img.width)};
    evaluate(*model_, {item}, ignore_index_, &preds);
    return from_labels(preds.at(0));
  }

  py::dict evaluate_split(const std::string& dir) const {
    return report_dict(evaluate(*model_, load_split(dir), ignore_index_));
  }

 private:
  std::unique_ptr<SegModel<float>> model_;
  int ignore_index_ = 255;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "FANet desk-scale segmentation toolkit";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, std::uint64_t index, std::size_t size) {
        SceneSpec spec;
        spec.seed = seed;
        spec.size = size;
        spec.validate();
        const auto s = generate_scene(spec, index);
        return py::make_tuple(from_image(s.image), from_labels(s.mask));
      },
      py::arg("seed"), py::arg("index"), py::arg("size") = 64, "Returns (image HxWx3 in [0,1], mask HxW uint8).");

  m.def(
      "sharpen", [](const ImageArray& f, double c) { return from_image(sharpen(to_image(f), c)); }, py::arg("image"),
      py::arg("c") = 1.0);
  m.def(
      "contrast_map",
      [](const ImageArray& f, double alpha, double beta, double gamma) {
        return from_image(contrast_map(to_image(f), enhance_params(1.0, alpha, beta, gamma)));
      },
      py::arg("image"), py::arg("alpha") = 4.0, py::arg("beta") = 0.5, py::arg("gamma") = 2.0);
  m.def(
      "contrast_enhance",
      [](const ImageArray& f, double alpha, double beta, double gamma) {
        return from_image(contrast_enhance(to_image(f), enhance_params(1.0, alpha, beta, gamma)));
      },
      py::arg("image"), py::arg("alpha") = 4.0, py::arg("beta") = 0.5, py::arg("gamma") = 2.0);
  m.def(
      "enhance_combine",
      [](const ImageArray& f, double c, double alpha, double beta, double gamma) {
        return from_image(enhance_combine(to_image(f), enhance_params(c, alpha, beta, gamma)));
      },
      py::arg("image"), py::arg("c") = 1.0, py::arg("alpha") = 4.0, py::arg("beta") = 0.5, py::arg("gamma") = 2.0);

  m.def(
      "conv2d",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w, std::optional<py::array_t<double, py::array::c_style | py::array::forcecast>> b,
         std::size_t stride, std::size_t padding, std::size_t groups) {
        if (x.ndim() != 4 || w.ndim() != 4) throw DimensionError("conv2d expects NCHW input and OIHW weight");
        if (w.shape(2) != w.shape(3)) throw DimensionError("conv2d expects a square kernel");
        auto spec = ConvSpec<double>::create(x.shape(1), w.shape(0), w.shape(2), stride, padding, groups, b.has_value());
        if (spec.weight.numel() != static_cast<std::size_t>(w.size()))
          throw DimensionError("weight shape does not match input channels / groups");
        std::copy(w.data(), w.data() + w.size(), spec.weight.data().begin());
        if (b) {
          if (b->size() != w.shape(0)) throw DimensionError("bias length must equal output channels");
          std::copy(b->data(), b->data() + b->size(), spec.bias.data().begin());
        }
        Shape shape(x.shape(), x.shape() + 4);
        const Tensor<double> in(shape, std::vector<double>(x.data(), x.data() + x.size()));
        const auto y = conv2d(in, spec);
        py::array_t<double> out(std::vector<py::ssize_t>(y.shape().begin(), y.shape().end()));
        std::copy(y.data().begin(), y.data().end(), out.mutable_data());
        return out;
      },
      py::arg("x"), py::arg("weight"), py::arg("bias") = py::none(), py::arg("stride") = 1, py::arg("padding") = 0,
      py::arg("groups") = 1);

  m.def(
      "poly_lr",
      [](std::size_t iter, double base_lr, std::size_t max_iters, double power) {
        TrainConfig cfg;
        cfg.base_lr = base_lr;
        cfg.max_iters = max_iters;
        cfg.poly_power = power;
        return poly_lr(iter, cfg);
      },
      py::arg("iter"), py::arg("base_lr") = 9e-5, py::arg("max_iters") = 2000, py::arg("power") = 1.0);

  m.def(
      "metrics_from_confusion",
      [](const std::vector<std::vector<std::uint64_t>>& rows) {
        std::vector<std::uint64_t> flat;
        for (const auto& r : rows) {
          if (r.size() != rows.size()) throw DimensionError("confusion matrix must be square");
          flat.insert(flat.end(), r.begin(), r.end());
        }
        return report_dict(metrics_from_confusion(ConfusionMatrix(rows.size(), flat)));
      },
      py::arg("confusion"), "Rows are ground truth, columns predictions.");

  m.def(
      "gradcheck",
      [](const std::string& scope) {
        py::list out;
        for (const auto& e : gradcheck_scope(scope)) {
          py::dict d;
          d["name"] = e.name;
          d["max_relative_error"] = e.max_relative_error;
          d["coordinates"] = e.coordinates;
          out.append(d);
        }
        return out;
      },
      py::arg("scope"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one fanet subcommand in-process; returns (exit_code, stdout, stderr).");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const std::string&>(), py::arg("config_json") = "",
           py::arg("checkpoint") = "")
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("predict", &Model::predict, py::arg("image"), "HxWx3 float image in [0,1] -> HxW class ids.")
      .def("evaluate", &Model::evaluate_split, py::arg("split_dir"));
}
