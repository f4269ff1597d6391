#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "sparse3d/config.hpp"
#include "sparse3d/dataset.hpp"
#include "sparse3d/error.hpp"
#include "sparse3d/experiments.hpp"
#include "sparse3d/retrieval.hpp"

using namespace sparse3d;

namespace {

// Full sort by (squared distance, index) and a direct AP@k.
struct BruteForce {
  std::vector<std::vector<int>> ranked;
  double map = 0.0;
};

BruteForce brute_force(const nn::Tensor& e, const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(e.rows());
  BruteForce out;
  for (int q = 0; q < n; ++q) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < n; ++j) {
      if (j == q) continue;
      double s = 0.0;
      for (Eigen::Index c = 0; c < e.cols(); ++c) {
        const double diff = e(q, c) - e(j, c);
        s += diff * diff;
      }
      d.emplace_back(s, j);
    }
    std::sort(d.begin(), d.end());
    std::vector<int> list;
    int hits = 0;
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      list.push_back(d[i].second);
      if (labels[d[i].second] == labels[q]) {
        ++hits;
        sum += static_cast<double>(hits) / (i + 1);
      }
    }
    out.ranked.push_back(list);
    out.map += hits ? sum / hits : 0.0;
  }
  out.map /= n;
  return out;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.points = 12;
  c.descriptor.count = 24;
  c.shared_widths = {8, 16};
  c.classifier_widths = {8};
  c.decoder_widths = {16};
  c.voxel_resolution = 4;
  c.epochs = 2;
  c.batch_size = 4;
  c.synth_train_per_class = 3;
  c.synth_test_per_class = 2;
  c.seed = 99;
  return c;
}

}  // namespace

TEST_CASE("retrieval matches a brute-force oracle") {
  Rng rng = make_rng(21, Stream::kPoints, 0);
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Tensor e(200, 16);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = g(rng);
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) labels[i] = static_cast<int>(rng() % 5);
  const std::vector<int> ks = {5, 10};
  const RetrievalResult r = evaluate_retrieval(e, labels, ks);
  for (int k : ks) {
    const BruteForce b = brute_force(e, labels, k);
    CHECK(r.map_at_k.at(k) == doctest::Approx(b.map).epsilon(1e-12));
    for (int q = 0; q < 200; ++q) {
      const std::vector<int> head(r.ranked[q].begin(), r.ranked[q].begin() + k);
      CHECK(head == b.ranked[q]);
    }
  }
}

TEST_CASE("average precision by hand") {
  const std::vector<int> labels = {0, 0, 1, 0, 1};
  // Query 0; ranked 2 (miss), 1 (hit), 3 (hit): (1/2 + 2/3) / 2.
  const std::vector<int> ranked = {2, 1, 3, 4};
  CHECK(average_precision_at_k(ranked, labels, 0, 3) == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));
  CHECK(average_precision_at_k(ranked, labels, 0, 1) == 0.0);
  const std::vector<int> other = {0, 1, 3, 4};
  CHECK(average_precision_at_k(other, labels, 2, 4) == doctest::Approx(0.25));
}

TEST_CASE("separated clusters give perfect MAP, too few objects is an error") {
  nn::Tensor e(24, 3);
  std::vector<int> labels(24);
  Rng rng = make_rng(3, Stream::kPoints, 0);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  for (int i = 0; i < 24; ++i) {
    labels[i] = i % 4;
    for (int c = 0; c < 3; ++c) e(i, c) = 10.0 * labels[i] + u(rng);
  }
  const std::vector<int> k5 = {5};
  CHECK(evaluate_retrieval(e, labels, k5).map_at_k.at(5) == 1.0);
  const std::vector<int> k30 = {30};
  CHECK_THROWS_AS(evaluate_retrieval(e, labels, k30), Error);
}

TEST_CASE("synth4 splits are class-major with unique ids") {
  const Dataset d = make_synth4(3, 2);
  CHECK(d.class_names == std::vector<std::string>{"sphere", "cube", "cylinder", "torus"});
  REQUIRE(d.train.size() == 12);
  REQUIRE(d.test.size() == 8);
  CHECK(d.train[0].name == "sphere_train_0");
  CHECK(d.train[3].label == 1);
  CHECK(d.test[7].name == "torus_test_1");
  CHECK(d.test[0].id == 12);
}

TEST_CASE("metrics CSV format") {
  std::vector<EpochMetrics> log = {{1, 0.5, 0.25, 0.25, 0.75}};
  CHECK(metrics_csv(log) ==
        "epoch,loss,classification_loss,reconstruction_loss,train_accuracy\n"
        "1,0.5,0.25,0.25,0.75\n");
}

TEST_CASE("training is a pure function of the config") {
  const ExperimentConfig c = tiny_config();
  const Dataset d = make_synth4(c.synth_train_per_class, c.synth_test_per_class);
  const TrainingResult a = run_training(c, d);
  const TrainingResult b = run_training(c, d);
  REQUIRE(a.log.size() == 2);
  CHECK(metrics_csv(a.log) == metrics_csv(b.log));
  const auto pa = a.model->parameters(), pb = b.model->parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  CHECK(a.log[0].reconstruction_loss > 0.0);

  ExperimentConfig no_recon = c;
  no_recon.recon_weight = 0.0;
  const TrainingResult z = run_training(no_recon, d);
  CHECK(z.log[0].reconstruction_loss == 0.0);
  CHECK(metrics_csv(z.log) != metrics_csv(a.log));
  const auto pz = z.model->parameters();
  bool differ = false;
  for (std::size_t i = 0; i < pa.size(); ++i) differ = differ || pa[i]->value != pz[i]->value;
  CHECK(differ);
}

TEST_CASE("checkpoints round trip through the experiment helpers") {
  const ExperimentConfig c = tiny_config();
  const Dataset d = make_synth4(c.synth_train_per_class, c.synth_test_per_class);
  TrainingResult r = run_training(c, d);
  const nn::Checkpoint ck = make_checkpoint(*r.model, c, 2);
  CHECK(ck.metadata("epoch") == 2.0);
  CHECK(ck.metadata("descriptor_count") == 24.0);
  auto loaded = model_from_checkpoint(ck, c, d.num_classes());
  const ClassificationReport x = evaluate_classification(*r.model, c, d);
  const ClassificationReport y = evaluate_classification(*loaded, c, d);
  CHECK(x.predictions == y.predictions);
  CHECK(x.accuracy == y.accuracy);
  const std::string csv = x.per_class_csv();
  CHECK(csv.rfind("class,correct,total,accuracy\n", 0) == 0);
  CHECK(csv.find("\noverall,") != std::string::npos);

  ExperimentConfig other = c;
  other.descriptor.kind = DescriptorKind::kTypeB;
  CHECK_THROWS_AS(model_from_checkpoint(ck, other, d.num_classes()), Error);
}

TEST_CASE("reconstruction IoU from saturated logits") {
  VoxelGrid target(4);
  for (std::size_t i = 0; i < target.occupancy.size(); i += 3) target.occupancy[i] = 1;
  std::vector<double> logits(target.occupancy.size());
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = target.occupancy[i] ? 50.0 : -50.0;
  CHECK(voxel_iou(decode_voxels(logits, 4), target) == 1.0);
  std::fill(logits.begin(), logits.end(), -50.0);
  CHECK(voxel_iou(decode_voxels(logits, 4), target) == 0.0);

  const ExperimentConfig c = tiny_config();
  const Dataset d = make_synth4(c.synth_train_per_class, c.synth_test_per_class);
  Model m(c.model_config(d.num_classes()), 1);
  const std::vector<int> ids = {0, 7};
  const auto items = evaluate_reconstruction(m, c, d, ids);
  REQUIRE(items.size() == 2);
  CHECK(items[1].name == "torus_test_1");
  CHECK(items[0].target.resolution == 4);
  const std::vector<int> bad = {8};
  CHECK_THROWS_AS(evaluate_reconstruction(m, c, d, bad), Error);
}
