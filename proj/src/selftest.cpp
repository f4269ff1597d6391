#include "sparse3d/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sparse3d/descriptor.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/model.hpp"
#include "sparse3d/retrieval.hpp"

namespace sparse3d {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

PointCloud random_cloud(int k, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  PointCloud c(k);
  for (int i = 0; i < k; ++i) {
    Vec3 n;
    for (int a = 0; a < 3; ++a) {
      c.points(i, a) = gauss(rng);
      n[a] = gauss(rng);
    }
    c.normals.row(i) = n.normalized().transpose();
  }
  return c;
}

double max_abs_diff(const Features& a, const Features& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return (a - b).cwiseAbs().maxCoeff();
}

constexpr DescriptorKind kInvariantKinds[] = {DescriptorKind::kTypeA, DescriptorKind::kTypeB,
                                              DescriptorKind::kTypeC};

ModelConfig toy_config(bool batchnorm) {
  ModelConfig c;
  c.kind = DescriptorKind::kTypeA;
  c.shared_widths = {6, 8};
  c.classifier_widths = {5};
  c.decoder_widths = {6};
  c.voxel_resolution = 2;
  c.num_classes = 3;
  c.dropout = 0.0;
  c.batchnorm = batchnorm;
  return c;
}

}  // namespace

SuiteResult check_rigid_invariance(int pairs, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kPoints, 1);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  double worst = 0.0;
  for (int t = 0; t < pairs; ++t) {
    const PointCloud cloud = random_cloud(16, rng);
    const Mat3 r = random_rotation(RotationMode::kSO3, rng);
    const Vec3 translation(shift(rng), shift(rng), shift(rng));
    const PointCloud moved = apply_rigid(cloud, r, translation);
    for (DescriptorKind kind : kInvariantKinds) {
      DescriptorOptions opt{kind, 64, false, false};
      Rng a = make_rng(seed, Stream::kDescriptor, static_cast<std::uint64_t>(t));
      Rng b = a;
      worst = std::max(worst, max_abs_diff(build_descriptor_set(cloud, opt, a).rows,
                                           build_descriptor_set(moved, opt, b).rows));
    }
  }
  return {"rigid invariance", worst <= 1e-9,
          std::to_string(pairs) + " pairs, max deviation " + sci(worst)};
}

SuiteResult check_scale_invariance(int clouds, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kPoints, 2);
  double worst = 0.0;
  for (int t = 0; t < clouds; ++t) {
    const PointCloud cloud = random_cloud(16, rng);
    for (DescriptorKind kind : kInvariantKinds) {
      DescriptorOptions opt{kind, 64, true, false};
      Rng base_rng = make_rng(seed, Stream::kDescriptor, static_cast<std::uint64_t>(t));
      Rng r0 = base_rng;
      const Features ref = build_descriptor_set(cloud, opt, r0).rows;
      for (double lambda : {1e-3, 1.0, 1e3}) {
        PointCloud scaled = cloud;
        scaled.points *= lambda;
        Rng r1 = base_rng;
        worst = std::max(worst, max_abs_diff(ref, build_descriptor_set(scaled, opt, r1).rows));
      }
    }
  }
  return {"scale invariance", worst <= 1e-9,
          std::to_string(clouds) + " clouds, max deviation " + sci(worst)};
}

SuiteResult check_permutation_invariance(int models, int permutations, std::uint64_t seed) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Rng rng = make_rng(seed, Stream::kShuffle, 3);
  int failures = 0;
  for (int m = 0; m < models; ++m) {
    ModelConfig config;
    config.kind = DescriptorKind::kTypeC;
    config.shared_widths = {16, 32};
    config.classifier_widths = {16};
    config.decoder_widths = {};
    config.voxel_resolution = 2;
    config.num_classes = 4;
    Model model(config, seed + static_cast<std::uint64_t>(m));
    Features rows(64, config.feature_dim());
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = gauss(rng);
    const nn::RowVector ref = model.forward_latent(rows);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(rows.rows()));
    for (int p = 0; p < permutations; ++p) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      Features shuffled(rows.rows(), rows.cols());
      for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        shuffled.row(i) = rows.row(perm[static_cast<std::size_t>(i)]);
      }
      const nn::RowVector got = model.forward_latent(shuffled);
      failures += !std::equal(ref.data(), ref.data() + ref.size(), got.data());
    }
  }
  return {"permutation invariance", failures == 0,
          std::to_string(models * permutations) + " permutations, " + std::to_string(failures) +
              " not bitwise equal"};
}

SuiteResult check_pose_invariance(int objects, std::uint64_t seed) {
  ModelConfig config;
  config.shared_widths = {16, 32};
  config.classifier_widths = {16};
  config.decoder_widths = {};
  config.voxel_resolution = 2;
  config.num_classes = 4;
  Model model(config, seed);
  DescriptorOptions opt{DescriptorKind::kTypeC, 128, false, false};
  int mismatches = 0;
  for (int i = 0; i < objects; ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    Rng point_rng = make_rng(seed, Stream::kPoints, id);
    const PointCloud cloud = synth_shape(kAllShapes[static_cast<std::size_t>(i) % 4], 16, point_rng);
    Rng rot_rng = make_rng(seed, Stream::kRotation, id);
    const PointCloud rotated = apply_rigid(cloud, random_rotation(RotationMode::kSO3, rot_rng));
    Rng da = make_rng(seed, Stream::kDescriptor, id);
    Rng db = da;
    const nn::Tensor la = model.forward_latent(build_descriptor_set(cloud, opt, da).rows);
    const nn::Tensor lb = model.forward_latent(build_descriptor_set(rotated, opt, db).rows);
    Eigen::Index ca = 0, cb = 0;
    model.forward_classify(la).row(0).maxCoeff(&ca);
    model.forward_classify(lb).row(0).maxCoeff(&cb);
    mismatches += ca != cb;
  }
  return {"pose invariance", mismatches == 0,
          std::to_string(objects) + " objects, " + std::to_string(mismatches) +
              " prediction changes"};
}

GradcheckReport run_gradcheck(std::uint64_t seed) {
  GradcheckReport report;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Rng data_rng = make_rng(seed, Stream::kPoints, 4);

  std::vector<Features> sets;
  for (int b = 0; b < 3; ++b) {
    Features f(10, 4);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = gauss(data_rng);
    sets.push_back(f);
  }
  std::vector<const Features*> ptrs;
  for (const auto& f : sets) ptrs.push_back(&f);
  const std::vector<int> labels = {0, 2, 1};
  nn::Tensor targets(3, 8);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = (data_rng() & 1) ? 1.0 : 0.0;

  auto check_model = [&](bool batchnorm, nn::Mode mode) {
    Model model(toy_config(batchnorm), seed);
    if (batchnorm) {
      // Non-trivial running statistics for the evaluation-mode pass.
      for (int i = 0; i < 3; ++i) model.forward(ptrs, nn::Mode::kTrain, true);
    }
    auto evaluate = [&](bool backward) {
      const auto out = model.forward(ptrs, mode, true);
      const MultitaskLoss loss =
          multitask_loss(out.class_logits, labels, &out.voxel_logits, &targets, 1.0);
      if (backward) model.backward(loss.grad_class, &loss.grad_voxel);
      return loss.total;
    };
    return nn::gradient_check(model.parameters(), evaluate);
  };
  report.full_model = check_model(false, nn::Mode::kTrain);
  report.full_model_eval = check_model(true, nn::Mode::kEval);

  Rng init = make_rng(seed, Stream::kInit, 5);
  nn::Tensor x(6, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(data_rng);
  {
    nn::Linear layer(5, 4, init);
    report.layers.emplace_back("linear", nn::layer_gradient_check(layer, x, data_rng));
  }
  {
    nn::BatchNorm layer(5);
    report.layers.emplace_back("batchnorm", nn::layer_gradient_check(layer, x, data_rng));
  }
  {
    nn::Sigmoid layer;
    report.layers.emplace_back("sigmoid", nn::layer_gradient_check(layer, x, data_rng));
  }
  {
    // Inputs kept away from the kink.
    nn::Tensor shifted = x;
    for (Eigen::Index i = 0; i < shifted.size(); ++i) {
      double& v = shifted.data()[i];
      if (std::abs(v) < 0.1) v += v < 0 ? -0.1 : 0.1;
    }
    nn::ReLU layer;
    report.layers.emplace_back("relu", nn::layer_gradient_check(layer, shifted, data_rng));
  }
  return report;
}

SuiteResult check_gradients(std::uint64_t seed) {
  const GradcheckReport r = run_gradcheck(seed);
  bool ok = r.full_model.max_relative_error < 1e-4 && r.full_model_eval.max_relative_error < 1e-4;
  std::string detail = "model " + sci(r.full_model.max_relative_error) + ", model (eval bn) " +
                       sci(r.full_model_eval.max_relative_error);
  for (const auto& [name, res] : r.layers) {
    ok = ok && res.max_relative_error < 1e-6;
    detail += ", " + name + " " + sci(res.max_relative_error);
  }
  return {"gradients", ok, detail};
}

SuiteResult check_voxel_threshold() {
  const std::vector<double> probs = {0.2, std::nextafter(0.2, 1.0), 0.19, 0.9, 0.0, 1.0, 0.2, 0.5};
  const VoxelGrid g = decode_probabilities(probs, 2, 0.2);
  const std::vector<std::uint8_t> expected = {0, 1, 0, 1, 0, 1, 0, 1};
  const bool ok = g.occupancy == expected;
  return {"voxel threshold", ok, ok ? "0.2 maps to empty, values above map to occupied"
                                    : "unexpected occupancy"};
}

SuiteResult check_round_trips(std::uint64_t seed) {
  std::vector<std::string> failed;
  Rng rng = make_rng(seed, Stream::kPoints, 6);

  {
    TriangleMesh mesh;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 6; ++i) mesh.vertices.emplace_back(u(rng), u(rng), u(rng));
    mesh.faces = {{0, 1, 2}, {2, 3, 4}, {4, 5, 0}};
    std::ostringstream a;
    write_off(a, mesh);
    std::string glued = a.str();
    glued.erase(3, 1);  // "OFF\n6 3 0" -> "OFF6 3 0"
    std::ostringstream b, c;
    write_off(b, parse_off(a.str()));
    write_off(c, parse_off(glued));
    if (a.str() != b.str() || a.str() != c.str()) failed.push_back("OFF");
  }
  {
    const PointCloud cloud = random_cloud(16, rng);
    const DescriptorSet set = build_descriptor_set(cloud, {DescriptorKind::kTypeC, 64, true, false}, rng);
    std::stringstream a;
    write_descriptor_set(a, set);
    std::stringstream b;
    write_descriptor_set(b, read_descriptor_set(a));
    if (a.str() != b.str()) failed.push_back("SPD1");
  }
  {
    Model model(toy_config(true), seed);
    std::stringstream a;
    nn::save_checkpoint(a, model.to_checkpoint());
    std::stringstream b;
    nn::save_checkpoint(b, nn::load_checkpoint(a));
    if (a.str() != b.str()) failed.push_back("SPN1");
  }
  {
    VoxelGrid g(4);
    for (auto& v : g.occupancy) v = static_cast<std::uint8_t>(rng() & 1);
    std::stringstream a;
    write_voxels(a, g);
    std::stringstream b;
    write_voxels(b, read_voxels(a));
    if (a.str() != b.str()) failed.push_back("SPV1");
  }
  std::string detail = failed.empty() ? "OFF, SPD1, SPN1, SPV1 byte-identical" : "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {"format round trips", failed.empty(), detail};
}

SuiteResult check_retrieval(std::uint64_t seed) {
  // Four tight, well-separated clusters: every top-5 neighbour shares the label.
  std::normal_distribution<double> gauss(0.0, 1e-3);
  Rng rng = make_rng(seed, Stream::kPoints, 7);
  const int n = 40;
  nn::Tensor e(n, 8);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 4;
    for (int c = 0; c < 8; ++c) e(i, c) = (c == i % 4 ? 10.0 : 0.0) + gauss(rng);
  }
  const int ks[] = {5, 10};
  const RetrievalResult r = evaluate_retrieval(e, labels, ks);
  bool self_excluded = true;
  for (int q = 0; q < n; ++q) {
    const auto& list = r.ranked[static_cast<std::size_t>(q)];
    self_excluded = self_excluded && std::find(list.begin(), list.end(), q) == list.end();
  }
  const bool ok = self_excluded && r.map_at_k.at(5) == 1.0 && r.map_at_k.at(10) == 1.0;
  return {"retrieval", ok,
          "clustered MAP@5 " + sci(r.map_at_k.at(5)) + ", MAP@10 " + sci(r.map_at_k.at(10))};
}

std::vector<SuiteResult> run_selftests(std::uint64_t seed) {
  return {check_rigid_invariance(200, seed),
          check_scale_invariance(50, seed),
          check_permutation_invariance(10, 10, seed),
          check_pose_invariance(100, seed),
          check_gradients(seed),
          check_voxel_threshold(),
          check_round_trips(seed),
          check_retrieval(seed)};
}

}  // namespace sparse3d
