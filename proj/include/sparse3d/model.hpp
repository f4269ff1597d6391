#ifndef SPARSE3D_MODEL_HPP_
#define SPARSE3D_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparse3d/descriptor.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/nn.hpp"

namespace sparse3d {

// Shared per-descriptor MLP -> row max-pool -> latent, with a classifier head
// and a voxel decoder on the latent.
struct ModelConfig {
  DescriptorKind kind = DescriptorKind::kTypeC;
  std::vector<int> shared_widths = {64, 128, 1024};
  std::vector<int> classifier_widths = {512, 256};
  double dropout = 0.3;
  std::vector<int> decoder_widths = {1024, 2048};
  int voxel_resolution = 16;
  double recon_weight = 1.0;
  int num_classes = 40;
  bool batchnorm = true;

  int feature_dim() const { return feature_width(kind); }
  int latent_dim() const { return shared_widths.empty() ? 0 : shared_widths.back(); }
  int voxel_count() const { return voxel_resolution * voxel_resolution * voxel_resolution; }
  void validate() const;
  // Canonical text of every architecture-defining field.
  std::string architecture() const;
  std::uint32_t architecture_hash() const;
};

std::uint32_t fnv1a32(std::string_view text);

struct MultitaskLoss {
  double total = 0.0;
  double classification = 0.0;
  double reconstruction = 0.0;
  nn::Tensor grad_class;
  nn::Tensor grad_voxel;  // empty when the reconstruction term is off
};

// CE(class logits) + weight * BCE(voxel logits). Voxel terms are skipped when
// `voxel_logits` is null or the weight is zero.
MultitaskLoss multitask_loss(const nn::Tensor& class_logits, std::span<const int> labels,
                             const nn::Tensor* voxel_logits, const nn::Tensor* voxel_targets,
                             double recon_weight);

// Occupied iff sigmoid(logit) > threshold (strict).
VoxelGrid decode_voxels(std::span<const double> logits, int resolution, double threshold = 0.2);
// Same rule on probabilities already passed through the sigmoid.
VoxelGrid decode_probabilities(std::span<const double> probabilities, int resolution,
                               double threshold = 0.2);

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  struct BatchOutput {
    nn::Tensor latent;         // B x L
    nn::Tensor class_logits;   // B x C
    nn::Tensor voxel_logits;   // B x R^3, empty unless requested
  };

  // Runs every descriptor row of every object through the shared MLP as one
  // stacked matrix, then pools each object's rows.
  BatchOutput forward(std::span<const Features* const> sets, nn::Mode mode,
                      bool with_reconstruction);
  // Backward through the last forward; `grad_voxel` may be null.
  void backward(const nn::Tensor& grad_class, const nn::Tensor* grad_voxel);

  // Evaluation-mode single-object helpers.
  nn::RowVector forward_latent(const Features& rows);
  nn::Tensor forward_classify(const nn::Tensor& latent, nn::Mode mode = nn::Mode::kEval);
  nn::Tensor forward_reconstruct(const nn::Tensor& latent);

  std::vector<nn::Parameter*> parameters();

  // Parameters plus metadata (descriptor kind, architecture hash, ...).
  nn::Checkpoint to_checkpoint();
  void load(const nn::Checkpoint& checkpoint);

 private:
  void check_width(const Features& rows) const;

  ModelConfig config_;
  nn::Sequential shared_;
  nn::Sequential classifier_;
  nn::Sequential decoder_;

  std::vector<Eigen::Index> offsets_;
  std::vector<std::vector<Eigen::Index>> argmax_;
  Eigen::Index stacked_rows_ = 0;
  bool decoder_active_ = false;
};

}  // namespace sparse3d

#endif  // SPARSE3D_MODEL_HPP_
