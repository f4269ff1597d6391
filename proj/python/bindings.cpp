#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparse3d/config.hpp"
#include "sparse3d/dataset.hpp"
#include "sparse3d/descriptor.hpp"
#include "sparse3d/error.hpp"
#include "sparse3d/experiments.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/retrieval.hpp"
#include "sparse3d/selftest.hpp"

namespace py = pybind11;
using namespace sparse3d;

namespace {

ShapeKind parse_shape(const std::string& name) {
  for (ShapeKind kind : kAllShapes) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown shape '" + name + "'");
}

PointCloud make_cloud(const Points& points, const Points& normals) {
  if (points.rows() != normals.rows()) throw Error("points and normals differ in length");
  PointCloud cloud;
  cloud.points = points;
  cloud.normals = normals;
  return cloud;
}

py::dict metrics_dict(const EpochMetrics& m) {
  py::dict d;
  d["epoch"] = m.epoch;
  d["loss"] = m.loss;
  d["classification_loss"] = m.classification_loss;
  d["reconstruction_loss"] = m.reconstruction_loss;
  d["train_accuracy"] = m.train_accuracy;
  return d;
}

std::unique_ptr<Model> load_model(const ExperimentConfig& config, const Dataset& dataset,
                                  const std::string& checkpoint) {
  return model_from_checkpoint(nn::load_checkpoint(checkpoint), config, dataset.num_classes());
}

}  // namespace

PYBIND11_MODULE(_sparse3d, m) {
  m.doc() = "Rotation-invariant descriptors and set networks for sparse point clouds";

  const auto& error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());

  m.def("feature_width", [](const std::string& kind) {
    return feature_width(parse_descriptor_kind(kind));
  });

  m.def(
      "descriptors",
      [](const Points& points, const Points& normals, const std::string& kind, int count,
         bool scale_norm, bool fold_normals, std::uint64_t seed) {
        const PointCloud cloud = make_cloud(points, normals);
        Rng rng = make_rng(seed, Stream::kDescriptor, 0);
        return build_descriptor_set(
                   cloud, {parse_descriptor_kind(kind), count, scale_norm, fold_normals}, rng)
            .rows;
      },
      py::arg("points"), py::arg("normals"), py::arg("kind") = "c", py::arg("count") = 512,
      py::arg("scale_norm") = false, py::arg("fold_normals") = false, py::arg("seed") = 0);

  m.def(
      "synth_shape",
      [](const std::string& shape, int k, std::uint64_t seed) {
        Rng rng = make_rng(seed, Stream::kPoints, 0);
        const PointCloud c = synth_shape(parse_shape(shape), k, rng);
        return py::make_tuple(c.points, c.normals);
      },
      py::arg("shape"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "random_rotation",
      [](const std::string& mode, std::uint64_t seed) {
        Rng rng = make_rng(seed, Stream::kRotation, 0);
        return Mat3(random_rotation(parse_rotation_mode(mode), rng));
      },
      py::arg("mode") = "so3", py::arg("seed") = 0);

  m.def("parse_off", [](const std::string& text) {
    const TriangleMesh mesh = parse_off(std::string_view(text));
    Points v(static_cast<Eigen::Index>(mesh.vertices.size()), 3);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      v.row(static_cast<Eigen::Index>(i)) = mesh.vertices[i].transpose();
    }
    return py::make_tuple(v, mesh.faces);
  });

  m.def(
      "sample_off",
      [](const std::string& text, int k, std::uint64_t seed) {
        Rng rng = make_rng(seed, Stream::kPoints, 0);
        const PointCloud c =
            sample_surface(normalize_mesh(parse_off(std::string_view(text))), k, rng);
        return py::make_tuple(c.points, c.normals);
      },
      py::arg("text"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "retrieval",
      [](const nn::Tensor& embeddings, const std::vector<int>& labels, const std::vector<int>& ks) {
        const RetrievalResult r = evaluate_retrieval(embeddings, labels, ks);
        return py::make_tuple(r.ranked, r.map_at_k);
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("ks") = std::vector<int>{5, 10});

  m.def(
      "decode_voxels",
      [](const std::vector<double>& logits, int resolution, double threshold) {
        return decode_voxels(logits, resolution, threshold).occupancy;
      },
      py::arg("logits"), py::arg("resolution"), py::arg("threshold") = 0.2);

  m.def(
      "selftest",
      [](std::uint64_t seed) {
        std::vector<py::tuple> out;
        for (const SuiteResult& r : run_selftests(seed)) {
          out.push_back(py::make_tuple(r.name, r.passed, r.detail));
        }
        return out;
      },
      py::arg("seed") = 0);

  m.def("normalize_config", [](const std::string& text) { return parse_config(text).to_text(); });

  m.def(
      "train",
      [](const std::string& config_text, const std::string& checkpoint,
         const std::function<void(py::dict)>& on_epoch) {
        const ExperimentConfig config = parse_config(config_text);
        const Dataset dataset = load_dataset(config);
        EpochCallback callback;
        if (on_epoch) callback = [&](const EpochMetrics& e) { on_epoch(metrics_dict(e)); };
        TrainingResult result = run_training(config, dataset, callback);
        if (!checkpoint.empty()) {
          const int last = result.log.empty() ? 0 : result.log.back().epoch;
          nn::save_checkpoint(checkpoint, make_checkpoint(*result.model, config, last));
        }
        std::vector<py::dict> log;
        for (const auto& e : result.log) log.push_back(metrics_dict(e));
        return log;
      },
      py::arg("config"), py::arg("checkpoint") = "", py::arg("on_epoch") = nullptr);

  m.def(
      "evaluate",
      [](const std::string& config_text, const std::string& checkpoint) {
        const ExperimentConfig config = parse_config(config_text);
        const Dataset dataset = load_dataset(config);
        auto model = load_model(config, dataset, checkpoint);
        const ClassificationReport r = evaluate_classification(*model, config, dataset);
        return py::make_tuple(r.accuracy, r.predictions, r.labels);
      },
      py::arg("config"), py::arg("checkpoint"));

  m.def(
      "latents",
      [](const std::string& config_text, const std::string& checkpoint) {
        const ExperimentConfig config = parse_config(config_text);
        const Dataset dataset = load_dataset(config);
        auto model = load_model(config, dataset, checkpoint);
        const auto objects = prepare_objects(dataset.test, config, false);
        return compute_latents(*model, config, objects, config.test_rotation);
      },
      py::arg("config"), py::arg("checkpoint"));
}
