// sparse3d command-line tool.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparse3d/config.hpp"
#include "sparse3d/dataset.hpp"
#include "sparse3d/descriptor.hpp"
#include "sparse3d/error.hpp"
#include "sparse3d/experiments.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/selftest.hpp"

namespace fs = std::filesystem;
using namespace sparse3d;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Settings shared by every subcommand that reads a config file. Explicit
// flags are applied after the file, so they win.
struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
  std::string seed, epochs, k, nd, kind, data_root, recon_weight;

  void attach(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--config", path, "Flat key = value experiment config");
    if (required) opt->required();
    opt->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Override the config seed");
    app->add_option("--epochs", epochs, "Override the number of epochs");
    app->add_option("--k", k, "Override the number of sampled points K");
    app->add_option("--nd", nd, "Override the descriptor count N_d");
    app->add_option("--kind", kind, "Override the descriptor kind (raw|a|b|c)");
    app->add_option("--data-root", data_root, "ModelNet40 root (default $SPARSE3D_DATA)");
    app->add_option("--recon-weight", recon_weight, "Override the reconstruction loss weight");
    app->add_option("--set", sets, "Any other config override as key=value (repeatable)");
  }

  ExperimentConfig load() const {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
    auto apply = [&](const char* key, const std::string& v) {
      if (!v.empty()) apply_setting(c, key, v);
    };
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    apply("seed", seed);
    apply("epochs", epochs);
    apply("k", k);
    apply("nd", nd);
    apply("descriptor", kind);
    apply("data_root", data_root);
    apply("recon_weight", recon_weight);
    c.validate();
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// "x y z nx ny nz" per line; '#' comments.
PointCloud load_point_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::array<double, 6>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream s(line);
    std::array<double, 6> r{};
    int n = 0;
    while (n < 6 && s >> r[static_cast<std::size_t>(n)]) ++n;
    if (n == 0 && s.eof()) continue;
    if (n != 6) throw ParseError(line_no, "expected 6 numbers: x y z nx ny nz");
    rows.push_back(r);
  }
  PointCloud cloud(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    cloud.points.row(e) << rows[i][0], rows[i][1], rows[i][2];
    Vec3 n(rows[i][3], rows[i][4], rows[i][5]);
    if (!(n.norm() > 0.0)) throw ParseError(static_cast<int>(i) + 1, "zero normal");
    cloud.normals.row(e) = n.normalized().transpose();
  }
  return cloud;
}

struct ExtractArgs {
  std::string input, kind = "c", out;
  int k = 16, nd = 512;
  bool scale_norm = false, fold_normals = false;
  std::uint64_t seed = 0;
};

int run_extract(const ExtractArgs& a) {
  DescriptorOptions opt{parse_descriptor_kind(a.kind), a.nd, a.scale_norm, a.fold_normals};
  const int need = points_per_descriptor(opt.kind);
  if (a.k < need) throw Error("need ≥ " + std::to_string(need) + " points, got K = " + std::to_string(a.k));
  if (a.nd < 1) throw Error("--nd must be >= 1");

  const fs::path input(a.input);
  std::vector<fs::path> files;
  const bool directory = fs::is_directory(input);
  if (directory) {
    for (const auto& e : fs::recursive_directory_iterator(input)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".off" || ext == ".xyz")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no .off or .xyz files under " + input.string());
  } else {
    if (!fs::exists(input)) throw Error("input not found: " + input.string());
    files.push_back(input);
  }

  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    PointCloud cloud;
    if (files[i].extension() == ".xyz") {
      cloud = load_point_file(files[i]);
    } else {
      Rng rng = make_rng(a.seed, Stream::kPoints, id);
      cloud = sample_surface(normalize_mesh(load_off(files[i])), a.k, rng);
    }
    if (cloud.size() < need) {
      throw Error(files[i].string() + ": need ≥ " + std::to_string(need) + " points, got " +
                  std::to_string(cloud.size()));
    }
    Rng rng = make_rng(a.seed, Stream::kDescriptor, id);
    const DescriptorSet set = build_descriptor_set(cloud, opt, rng);
    fs::path out = a.out;
    if (directory) out = fs::path(a.out) / fs::relative(files[i], input).replace_extension(".spd");
    std::ostringstream bytes;
    write_descriptor_set(bytes, set);
    write_text(out, bytes.str());
    std::cout << out.string() << ": " << set.count() << " x " << set.width() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-invariant sparse point cloud descriptors, classification, retrieval and "
               "reconstruction"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Compute a descriptor set (SPD1) per mesh");
  extract->add_option("--input", ex.input, "OFF mesh, .xyz oriented points, or a directory")->required();
  extract->add_option("--kind", ex.kind, "Descriptor kind: raw|a|b|c")->capture_default_str();
  extract->add_option("--k", ex.k, "Points sampled per mesh")->capture_default_str();
  extract->add_option("--nd", ex.nd, "Descriptors per object")->capture_default_str();
  extract->add_flag("--scale-norm", ex.scale_norm, "Divide lengths by the set's longest side");
  extract->add_flag("--fold-normals", ex.fold_normals, "Fold normal angles into [0, pi/2]");
  extract->add_option("--seed", ex.seed, "Seed for sampling and combination draws")->capture_default_str();
  extract->add_option("--out", ex.out, "Output file, or directory when --input is one")->required();

  ConfigFlags train_cfg;
  std::string train_out, train_metrics;
  auto* train = app.add_subcommand("train", "Train a model and write an SPN1 checkpoint");
  train_cfg.attach(train);
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--metrics", train_metrics, "Per-epoch metrics CSV (default <out>.metrics.csv)");

  ConfigFlags eval_cfg;
  std::string eval_ckpt, eval_csv;
  auto* eval = app.add_subcommand("eval", "Test-split classification accuracy");
  eval_cfg.attach(eval);
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--csv", eval_csv, "Per-class CSV path (default: stdout)");

  ConfigFlags ret_cfg;
  std::string ret_ckpt, ret_topk = "5,10";
  auto* retrieve = app.add_subcommand("retrieve", "Latent nearest-neighbour retrieval MAP@k");
  ret_cfg.attach(retrieve);
  retrieve->add_option("--ckpt", ret_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--topk", ret_topk, "Comma-separated k values")->capture_default_str();

  ConfigFlags rec_cfg;
  std::string rec_ckpt, rec_ids, rec_dir;
  auto* reconstruct = app.add_subcommand("reconstruct", "Decode voxel grids (SPV1) for test objects");
  rec_cfg.attach(reconstruct);
  reconstruct->add_option("--ckpt", rec_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--ids", rec_ids, "Comma-separated test-split indices")->required();
  reconstruct->add_option("--out-dir", rec_dir, "Directory for <id>.spv dumps")->required();

  ConfigFlags abl_cfg;
  std::string abl_out;
  auto* ablation = app.add_subcommand("ablation", "Descriptor kind x reconstruction weight table");
  abl_cfg.attach(ablation);
  ablation->add_option("--out", abl_out, "CSV path (default: stdout)");

  ConfigFlags sweep_cfg;
  std::string sweep_ks = "8,16,32,64", sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Accuracy per point count K, trained and tested at K");
  sweep_cfg.attach(sweep);
  sweep->add_option("--ks", sweep_ks, "Comma-separated K values")->capture_default_str();
  sweep->add_option("--out", sweep_out, "CSV path (default: stdout)");

  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check at toy dims");
  gradcheck->add_option("--seed", gc_seed, "Seed")->capture_default_str();

  std::uint64_t st_seed = 0;
  auto* selftest = app.add_subcommand("selftest", "Run the invariance and format suites");
  selftest->add_option("--seed", st_seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*extract) return run_extract(ex);

    if (*train) {
      const ExperimentConfig config = train_cfg.load();
      const Dataset dataset = load_dataset(config);
      std::cerr << "training on " << dataset.train.size() << " objects, " << config.epochs
                << " epochs\n";
      TrainingResult result = run_training(config, dataset, [](const EpochMetrics& m) {
        std::cerr << "epoch " << m.epoch << " loss " << fixed(m.loss, 6) << " train_acc "
                  << fixed(m.train_accuracy) << "\n";
      });
      const int last = result.log.empty() ? 0 : result.log.back().epoch;
      nn::save_checkpoint(train_out, make_checkpoint(*result.model, config, last));
      write_text(train_metrics.empty() ? train_out + ".metrics.csv" : train_metrics,
                 metrics_csv(result.log));
      std::cout << "wrote " << train_out << "\n";
      return 0;
    }

    if (*eval) {
      const ExperimentConfig config = eval_cfg.load();
      const Dataset dataset = load_dataset(config);
      auto model = model_from_checkpoint(nn::load_checkpoint(eval_ckpt), config, dataset.num_classes());
      const ClassificationReport report = evaluate_classification(*model, config, dataset);
      if (eval_csv.empty()) {
        std::cout << report.per_class_csv();
      } else {
        write_text(eval_csv, report.per_class_csv());
      }
      std::cout << "accuracy " << fixed(report.accuracy) << "\n";
      return 0;
    }

    if (*retrieve) {
      const ExperimentConfig config = ret_cfg.load();
      const Dataset dataset = load_dataset(config);
      auto model = model_from_checkpoint(nn::load_checkpoint(ret_ckpt), config, dataset.num_classes());
      const auto ks = parse_int_list(ret_topk);
      const RetrievalResult r = evaluate_retrieval(*model, config, dataset, ks);
      for (const auto& [k, map] : r.map_at_k) std::cout << "MAP@" << k << " " << fixed(map) << "\n";
      return 0;
    }

    if (*reconstruct) {
      const ExperimentConfig config = rec_cfg.load();
      const Dataset dataset = load_dataset(config);
      auto model = model_from_checkpoint(nn::load_checkpoint(rec_ckpt), config, dataset.num_classes());
      const auto ids = parse_int_list(rec_ids);
      double total = 0.0;
      for (const auto& item : evaluate_reconstruction(*model, config, dataset, ids)) {
        std::ostringstream bytes;
        write_voxels(bytes, item.predicted);
        const fs::path out = fs::path(rec_dir) / (std::to_string(item.index) + ".spv");
        write_text(out, bytes.str());
        std::cout << item.index << " " << item.name << " iou " << fixed(item.iou) << " -> "
                  << out.string() << "\n";
        total += item.iou;
      }
      std::cout << "mean iou " << fixed(total / static_cast<double>(ids.size())) << "\n";
      return 0;
    }

    if (*ablation) {
      const ExperimentConfig config = abl_cfg.load();
      const Dataset dataset = load_dataset(config);
      const auto cells = run_ablation(config, dataset, [](const AblationCell& c) {
        std::cerr << to_string(c.kind) << " recon " << c.recon_weight << " accuracy "
                  << fixed(c.accuracy) << "\n";
      });
      if (abl_out.empty()) {
        std::cout << ablation_csv(cells);
      } else {
        write_text(abl_out, ablation_csv(cells));
      }
      return 0;
    }

    if (*sweep) {
      const ExperimentConfig config = sweep_cfg.load();
      const Dataset dataset = load_dataset(config);
      const auto ks = parse_int_list(sweep_ks);
      const auto rows = sparsity_sweep(config, dataset, ks, [](const SweepRow& r) {
        std::cerr << "K " << r.points << " accuracy " << fixed(r.accuracy) << "\n";
      });
      if (sweep_out.empty()) {
        std::cout << sweep_csv(rows);
      } else {
        write_text(sweep_out, sweep_csv(rows));
      }
      return 0;
    }

    if (*gradcheck) {
      const GradcheckReport r = run_gradcheck(gc_seed);
      bool ok = r.full_model.max_relative_error < 1e-4 && r.full_model_eval.max_relative_error < 1e-4;
      std::printf("full model (train mode, no batchnorm): max relative error %.3e over %zu entries\n",
                  r.full_model.max_relative_error, r.full_model.checked);
      std::printf("full model (eval mode, batchnorm): max relative error %.3e over %zu entries\n",
                  r.full_model_eval.max_relative_error, r.full_model_eval.checked);
      for (const auto& [name, res] : r.layers) {
        std::printf("%s: max relative error %.3e\n", name.c_str(), res.max_relative_error);
        ok = ok && res.max_relative_error < 1e-6;
      }
      std::printf("%s\n", ok ? "PASS" : "FAIL");
      return ok ? 0 : kRuntimeError;
    }

    if (*selftest) {
      bool ok = true;
      for (const auto& s : run_selftests(st_seed)) {
        std::printf("%s %s: %s\n", s.passed ? "PASS" : "FAIL", s.name.c_str(), s.detail.c_str());
        std::fflush(stdout);
        ok = ok && s.passed;
      }
      return ok ? 0 : kRuntimeError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
