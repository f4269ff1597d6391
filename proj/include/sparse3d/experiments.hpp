#ifndef SPARSE3D_EXPERIMENTS_HPP_
#define SPARSE3D_EXPERIMENTS_HPP_

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sparse3d/config.hpp"
#include "sparse3d/dataset.hpp"
#include "sparse3d/model.hpp"
#include "sparse3d/retrieval.hpp"

namespace sparse3d {

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double classification_loss = 0.0;
  double reconstruction_loss = 0.0;
  double train_accuracy = 0.0;
};

// Header plus one row per epoch, values printed with 17 significant digits.
std::string metrics_csv(const std::vector<EpochMetrics>& log);

struct TrainingResult {
  std::unique_ptr<Model> model;
  std::vector<EpochMetrics> log;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Multi-task training with Adam. Every epoch draws a fresh train rotation and
// fresh descriptor combinations per object; the run is a pure function of the
// config. Throws on a non-finite loss.
TrainingResult run_training(const ExperimentConfig& config, const Dataset& dataset,
                            const EpochCallback& on_epoch = {});

// Model parameters plus run metadata (descriptor count, seed, epoch, ...).
nn::Checkpoint make_checkpoint(Model& model, const ExperimentConfig& config, int epoch);
std::unique_ptr<Model> model_from_checkpoint(const nn::Checkpoint& checkpoint,
                                             const ExperimentConfig& config, int num_classes);

// Evaluation-mode latents (rows) for a list of objects; descriptor draws use
// `mode` for rotation and the evaluation epoch (0) for all seeds.
nn::Tensor compute_latents(Model& model, const ExperimentConfig& config,
                           const std::vector<PreparedObject>& objects, RotationMode mode);

struct ClassificationReport {
  double accuracy = 0.0;
  std::vector<int> labels;
  std::vector<int> predictions;
  std::vector<std::string> class_names;

  // class,correct,total,accuracy rows followed by an "overall" row.
  std::string per_class_csv() const;
};

ClassificationReport evaluate_classification(Model& model, const ExperimentConfig& config,
                                             const Dataset& dataset,
                                             const std::vector<ObjectRecord>& split,
                                             RotationMode mode);
// Test split under the config's test rotation.
ClassificationReport evaluate_classification(Model& model, const ExperimentConfig& config,
                                             const Dataset& dataset);

RetrievalResult evaluate_retrieval(Model& model, const ExperimentConfig& config,
                                   const Dataset& dataset, std::span<const int> ks);

struct ReconstructionItem {
  int index = 0;
  std::string name;
  VoxelGrid predicted;
  VoxelGrid target;
  double iou = 0.0;
};

// Test-split objects by index, decoded at config.voxel_threshold.
std::vector<ReconstructionItem> evaluate_reconstruction(Model& model,
                                                        const ExperimentConfig& config,
                                                        const Dataset& dataset,
                                                        std::span<const int> ids);

struct AblationCell {
  DescriptorKind kind = DescriptorKind::kTypeC;
  double recon_weight = 0.0;
  double accuracy = 0.0;
};

// {raw, A, B, C} x {recon_weight 0, 1}, one training run each with the base
// seed.
std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const Dataset& dataset,
                                       const std::function<void(const AblationCell&)>& on_cell = {});
std::string ablation_csv(const std::vector<AblationCell>& cells);

struct SweepRow {
  int points = 0;
  double accuracy = 0.0;
};

// One model per K, trained and tested at the same K.
std::vector<SweepRow> sparsity_sweep(const ExperimentConfig& base, const Dataset& dataset,
                                     std::span<const int> ks,
                                     const std::function<void(const SweepRow&)>& on_row = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace sparse3d

#endif  // SPARSE3D_EXPERIMENTS_HPP_
