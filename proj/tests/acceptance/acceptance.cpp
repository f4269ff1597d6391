// Acceptance suite: one PASS/FAIL line per criterion. Criteria 1-12 gate the
// exit code; 13 runs only when a ModelNet40 directory is available.
//
// Usage: sparse3d_acceptance [path/to/sparse3d]
// With the CLI path, criterion 12 runs the `train` subcommand twice.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sparse3d/config.hpp"
#include "sparse3d/dataset.hpp"
#include "sparse3d/descriptor.hpp"
#include "sparse3d/error.hpp"
#include "sparse3d/experiments.hpp"
#include "sparse3d/retrieval.hpp"
#include "sparse3d/selftest.hpp"

using namespace sparse3d;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

ExperimentConfig classification_config() {
  ExperimentConfig c;
  c.points = 16;
  c.train_rotation = RotationMode::kSO3;
  c.test_rotation = RotationMode::kSO3;
  c.descriptor = {DescriptorKind::kTypeC, 512, false, false};
  c.shared_widths = {32, 64, 128};
  c.classifier_widths = {64, 32};
  c.decoder_widths = {128};
  c.voxel_resolution = 16;
  c.recon_weight = 1.0;
  c.epochs = 3;
  c.seed = 1;
  return c;
}

ExperimentConfig ablation_config() {
  ExperimentConfig c = classification_config();
  c.descriptor.count = 128;
  c.epochs = 5;
  c.synth_train_per_class = 100;
  c.synth_test_per_class = 100;
  return c;
}

Outcome from_suite(const SuiteResult& r, double elapsed, double budget) {
  const bool in_time = elapsed < budget;
  std::string detail = r.detail + "; " + fmt("%.1f s", elapsed) + " (limit " + fmt("%.0f s", budget) + ")";
  return {r.passed && in_time, detail};
}

Outcome rigid_invariance() {
  const auto start = Clock::now();
  const SuiteResult r = check_rigid_invariance(1000, 101);
  return from_suite(r, seconds_since(start), 30.0);
}

Outcome scale_invariance() {
  const SuiteResult r = check_scale_invariance(200, 102);
  return {r.passed, r.detail};
}

Outcome permutation_invariance() {
  const SuiteResult r = check_permutation_invariance(100, 100, 103);
  return {r.passed, r.detail};
}

Outcome gradients() {
  const auto start = Clock::now();
  const SuiteResult r = check_gradients(105);
  return from_suite(r, seconds_since(start), 60.0);
}

Outcome overfit() {
  ExperimentConfig c = classification_config();
  c.epochs = 500;
  c.stop_train_accuracy = 1.0;
  c.synth_train_per_class = 2;
  c.synth_test_per_class = 1;
  c.seed = 6;
  const Dataset d = make_synth4(c.synth_train_per_class, c.synth_test_per_class);
  const auto start = Clock::now();
  const TrainingResult r = run_training(c, d);
  const double elapsed = seconds_since(start);
  const double acc = r.log.empty() ? 0.0 : r.log.back().train_accuracy;
  return {acc == 1.0 && elapsed < 120.0,
          std::to_string(d.train.size()) + " objects, train accuracy " + fmt("%.3f", acc) +
              " after " + std::to_string(r.log.size()) + " epochs, " + fmt("%.1f s", elapsed)};
}

Outcome retrieval_oracle() {
  Rng rng = make_rng(109, Stream::kPoints, 0);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 200;
  nn::Tensor e(n, 16);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = g(rng);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 8);
  const std::vector<int> ks = {5, 10};
  const RetrievalResult got = evaluate_retrieval(e, labels, ks);

  bool lists_equal = true;
  bool maps_equal = true;
  for (int k : ks) {
    double total = 0.0;
    for (int q = 0; q < n; ++q) {
      std::vector<std::pair<double, int>> all;
      for (int j = 0; j < n; ++j) {
        if (j == q) continue;
        double s = 0.0;
        for (Eigen::Index c = 0; c < e.cols(); ++c) s += (e(q, c) - e(j, c)) * (e(q, c) - e(j, c));
        all.emplace_back(s, j);
      }
      std::sort(all.begin(), all.end());
      int hits = 0;
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        const int j = all[static_cast<std::size_t>(i)].second;
        lists_equal = lists_equal && got.ranked[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)] == j;
        if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(q)]) {
          ++hits;
          sum += static_cast<double>(hits) / (i + 1);
        }
      }
      total += hits ? sum / hits : 0.0;
    }
    maps_equal = maps_equal && got.map_at_k.at(k) == total / n;
  }

  const SuiteResult clustered = check_retrieval(110);
  std::ostringstream detail;
  detail.precision(6);
  detail << "ranked lists " << (lists_equal ? "identical" : "differ") << ", MAP@5 "
         << got.map_at_k.at(5) << " MAP@10 " << got.map_at_k.at(10) << " "
         << (maps_equal ? "equal" : "differ") << " to oracle; clustered: " << clustered.detail;
  return {lists_equal && maps_equal && clustered.passed, detail.str()};
}

Outcome voxel_threshold() {
  const SuiteResult r = check_voxel_threshold();
  const std::vector<double> one = {0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2};
  const bool all_empty = decode_probabilities(one, 2, 0.2).occupied_count() == 0;
  return {r.passed && all_empty, r.detail};
}

Outcome round_trips() {
  const SuiteResult r = check_round_trips(111);
  const bool counts = binomial(16, 2) == 120 && binomial(16, 3) == 560;

  Rng rng = make_rng(111, Stream::kPoints, 1);
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud cloud(16);
  for (Eigen::Index i = 0; i < 16; ++i) {
    Vec3 n(g(rng), g(rng), g(rng));
    cloud.points.row(i) = Vec3(g(rng), g(rng), g(rng)).transpose();
    cloud.normals.row(i) = n.normalized().transpose();
  }
  Rng sel = make_rng(111, Stream::kDescriptor, 1);
  const auto combos = select_combinations(cloud, {DescriptorKind::kTypeC, 4096, false, false}, sel);
  std::map<std::array<int, 3>, int> multiplicity;
  for (const auto& c : combos) ++multiplicity[c];
  int sevens = 0, eights = 0;
  for (const auto& [c, m] : multiplicity) {
    sevens += m == 7;
    eights += m == 8;
  }
  const bool rule = combos.size() == 4096 && multiplicity.size() == 560 && eights == 176 &&
                    sevens == 384 && 4096 == 7 * 560 + 176;
  return {r.passed && counts && rule,
          r.detail + "; C(16,2)=" + std::to_string(binomial(16, 2)) + ", C(16,3)=" +
              std::to_string(binomial(16, 3)) + ", N_d=4096 gives " + std::to_string(sevens) +
              "x7 + " + std::to_string(eights) + "x8"};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const std::string& cli) {
  ExperimentConfig c = ablation_config();
  c.epochs = 2;
  c.synth_train_per_class = 25;
  c.synth_test_per_class = 5;
  c.seed = 12;
  if (cli.empty()) {
    const Dataset d = make_synth4(c.synth_train_per_class, c.synth_test_per_class);
    const std::string a = metrics_csv(run_training(c, d).log);
    const std::string b = metrics_csv(run_training(c, d).log);
    return {a == b, "library runs, metrics CSV " + std::string(a == b ? "identical" : "differs")};
  }
  const auto dir = std::filesystem::temp_directory_path() / "sparse3d_acceptance";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "run.cfg") << c.to_text();
  std::vector<std::string> csv;
  for (const char* tag : {"a", "b"}) {
    const auto out = dir / (std::string(tag) + ".spn");
    const std::string cmd = "\"" + cli + "\" train --config \"" + (dir / "run.cfg").string() +
                            "\" --out \"" + out.string() + "\" >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "train command failed: " + cmd};
    csv.push_back(read_file(out.string() + ".metrics.csv"));
  }
  const bool same = !csv[0].empty() && csv[0] == csv[1];
  return {same, "two `train` runs, metrics CSV " + std::string(same ? "identical" : "differs") +
                    " (" + std::to_string(csv[0].size()) + " bytes)"};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  bool all_passed = true;
  auto report = [&](int id, const std::string& name, const Outcome& o, bool gating) {
    std::printf("%s %d %s: %s\n", o.passed ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (gating && !o.passed) all_passed = false;
  };
  auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(id, name, o, true);
  };

  guarded(1, "descriptor rigid invariance", rigid_invariance);
  guarded(2, "scale invariance", scale_invariance);
  guarded(3, "latent permutation invariance", permutation_invariance);

  // Criteria 7 and 4 share one trained model.
  const ExperimentConfig c7 = classification_config();
  std::unique_ptr<Model> model;
  double train_seconds = 0.0;
  std::string train_error;
  try {
    const Dataset d = make_synth4(c7.synth_train_per_class, c7.synth_test_per_class);
    const auto start = Clock::now();
    model = run_training(c7, d).model;
    train_seconds = seconds_since(start);
  } catch (const std::exception& e) {
    train_error = e.what();
  }

  guarded(4, "end-to-end pose invariance", [&]() -> Outcome {
    if (!model) return {false, "training failed: " + train_error};
    ExperimentConfig c = c7;
    c.synth_test_per_class = 125;
    const Dataset d = make_synth4(1, c.synth_test_per_class);
    const auto upright = evaluate_classification(*model, c, d, d.test, RotationMode::kNone);
    const auto rotated = evaluate_classification(*model, c, d, d.test, RotationMode::kSO3);
    int same = 0;
    for (std::size_t i = 0; i < upright.predictions.size(); ++i) {
      same += upright.predictions[i] == rotated.predictions[i];
    }
    const int total = static_cast<int>(upright.predictions.size());
    return {total == 500 && same == total,
            std::to_string(same) + "/" + std::to_string(total) + " predictions unchanged"};
  });
  guarded(5, "gradient correctness", gradients);
  guarded(6, "overfit smoke test", overfit);
  guarded(7, "scaled classification", [&]() -> Outcome {
    if (!model) return {false, "training failed: " + train_error};
    const Dataset d = make_synth4(c7.synth_train_per_class, c7.synth_test_per_class);
    const auto r = evaluate_classification(*model, c7, d);
    return {r.accuracy >= 0.90 && train_seconds < 600.0,
            "synth4 K=16 SO(3)/SO(3) TypeC N_d=512, test accuracy " + fmt("%.4f", r.accuracy) +
                " after " + std::to_string(c7.epochs) + " epochs, training " +
                fmt("%.1f s", train_seconds) + " (limit 600 s)"};
  });
  guarded(8, "ablation ordering", [&]() -> Outcome {
    const ExperimentConfig base = ablation_config();
    const Dataset d = make_synth4(base.synth_train_per_class, base.synth_test_per_class);
    const auto cells = run_ablation(base, d);
    std::map<std::pair<DescriptorKind, bool>, double> acc;
    for (const auto& cell : cells) acc[{cell.kind, cell.recon_weight > 0.0}] = cell.accuracy;
    const double raw = acc.at({DescriptorKind::kRawTriangle, false});
    const double a = acc.at({DescriptorKind::kTypeA, false});
    const double b = acc.at({DescriptorKind::kTypeB, false});
    const double cc = acc.at({DescriptorKind::kTypeC, false});
    const double cr = acc.at({DescriptorKind::kTypeC, true});
    const bool ok = raw < a && a <= b + 0.03 && b + 0.03 <= cc + 0.06 && cr >= cc - 0.03;
    return {ok, "raw " + fmt("%.4f", raw) + ", A " + fmt("%.4f", a) + ", B " + fmt("%.4f", b) +
                    ", C " + fmt("%.4f", cc) + ", C+recon " + fmt("%.4f", cr)};
  });
  guarded(9, "retrieval oracle", retrieval_oracle);
  guarded(10, "voxel decode threshold", voxel_threshold);
  guarded(11, "format round trips and counts", round_trips);
  guarded(12, "training determinism", [&] { return determinism(cli); });

  const char* data = std::getenv("SPARSE3D_DATA");
  if (data == nullptr || !std::filesystem::is_directory(data)) {
    std::printf("SKIP 13 ModelNet40 reference run (non-gating): SPARSE3D_DATA not set\n");
  } else {
    Outcome o;
    try {
      ExperimentConfig c;
      c.dataset = "modelnet40";
      c.data_root = data;
      if (const char* e = std::getenv("SPARSE3D_MODELNET_EPOCHS")) c.epochs = std::atoi(e);
      const Dataset d = load_dataset(c);
      const TrainingResult r = run_training(c, d);
      const auto report13 = evaluate_classification(*r.model, c, d);
      o = {report13.accuracy >= 0.6469,
           "test accuracy " + fmt("%.4f", report13.accuracy) + " after " +
               std::to_string(c.epochs) + " epochs (expected 0.65 to 0.75)"};
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(13, "ModelNet40 reference run (non-gating)", o, false);
  }

  std::printf("%s\n", all_passed ? "ALL GATING CRITERIA PASSED" : "GATING FAILURES");
  return all_passed ? 0 : 1;
}
