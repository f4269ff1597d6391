#include "sparse3d/model.hpp"

#include <sstream>

#include "sparse3d/error.hpp"

namespace sparse3d {

using nn::LayerSpec;
using nn::Mode;
using nn::Tensor;

std::uint32_t fnv1a32(std::string_view text) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : text) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

void ModelConfig::validate() const {
  auto positive = [](const std::vector<int>& widths, const char* what, bool allow_empty) {
    if (widths.empty() && !allow_empty) throw Error(std::string(what) + " widths are empty");
    for (int w : widths) {
      if (w < 1) throw Error(std::string(what) + " widths must be positive");
    }
  };
  positive(shared_widths, "shared MLP", false);
  positive(classifier_widths, "classifier", true);
  positive(decoder_widths, "decoder", true);
  if (num_classes < 2) throw Error("model needs at least 2 classes");
  if (recon_weight < 0.0) throw Error("reconstruction weight must be >= 0");
  if (voxel_resolution < 2) throw Error("voxel resolution must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must be in [0, 1)");
}

std::string ModelConfig::architecture() const {
  std::ostringstream s;
  auto list = [&](const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  };
  s << "kind=" << to_string(kind) << ";f=" << feature_dim() << ";shared=";
  list(shared_widths);
  s << ";classifier=";
  list(classifier_widths);
  s << ";decoder=";
  list(decoder_widths);
  s << ";r=" << voxel_resolution << ";c=" << num_classes << ";bn=" << (batchnorm ? 1 : 0)
    << ";dropout=" << (dropout > 0.0 ? 1 : 0);
  return s.str();
}

std::uint32_t ModelConfig::architecture_hash() const { return fnv1a32(architecture()); }

MultitaskLoss multitask_loss(const Tensor& class_logits, std::span<const int> labels,
                             const Tensor* voxel_logits, const Tensor* voxel_targets,
                             double recon_weight) {
  MultitaskLoss out;
  nn::LossResult ce = nn::softmax_cross_entropy(class_logits, labels);
  out.classification = ce.loss;
  out.grad_class = std::move(ce.grad);
  out.total = out.classification;
  if (recon_weight > 0.0 && voxel_logits != nullptr && voxel_targets != nullptr) {
    nn::LossResult bce = nn::binary_cross_entropy_logits(*voxel_logits, *voxel_targets);
    out.reconstruction = bce.loss;
    out.grad_voxel = bce.grad * recon_weight;
    out.total += recon_weight * bce.loss;
  }
  return out;
}

VoxelGrid decode_probabilities(std::span<const double> probabilities, int resolution,
                               double threshold) {
  VoxelGrid grid(resolution);
  if (probabilities.size() != grid.occupancy.size()) {
    throw Error("voxel output length " + std::to_string(probabilities.size()) + " != R^3 = " +
                std::to_string(grid.occupancy.size()));
  }
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    grid.occupancy[i] = probabilities[i] > threshold ? 1 : 0;
  }
  return grid;
}

VoxelGrid decode_voxels(std::span<const double> logits, int resolution, double threshold) {
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = nn::sigmoid(logits[i]);
  return decode_probabilities(p, resolution, threshold);
}

namespace {

std::vector<LayerSpec> shared_specs(const ModelConfig& c) {
  std::vector<LayerSpec> specs;
  int in = c.feature_dim();
  for (int w : c.shared_widths) {
    specs.push_back(LayerSpec::linear(in, w));
    if (c.batchnorm) specs.push_back(LayerSpec::batchnorm(w));
    specs.push_back(LayerSpec::relu());
    in = w;
  }
  return specs;
}

std::vector<LayerSpec> classifier_specs(const ModelConfig& c) {
  std::vector<LayerSpec> specs;
  int in = c.latent_dim();
  for (int w : c.classifier_widths) {
    specs.push_back(LayerSpec::linear(in, w));
    if (c.batchnorm) specs.push_back(LayerSpec::batchnorm(w));
    specs.push_back(LayerSpec::relu());
    in = w;
  }
  if (c.dropout > 0.0) specs.push_back(LayerSpec::dropout(c.dropout));
  specs.push_back(LayerSpec::linear(in, c.num_classes));
  return specs;
}

std::vector<LayerSpec> decoder_specs(const ModelConfig& c) {
  std::vector<LayerSpec> specs;
  int in = c.latent_dim();
  for (int w : c.decoder_widths) {
    specs.push_back(LayerSpec::linear(in, w));
    specs.push_back(LayerSpec::relu());
    in = w;
  }
  specs.push_back(LayerSpec::linear(in, c.voxel_count()));
  return specs;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng init = make_rng(seed, Stream::kInit, 0);
  const auto s = shared_specs(config_);
  const auto c = classifier_specs(config_);
  const auto d = decoder_specs(config_);
  shared_ = nn::Sequential("shared", s, init);
  classifier_ = nn::Sequential("classifier", c, init);
  decoder_ = nn::Sequential("decoder", d, init);
}

void Model::check_width(const Features& rows) const {
  if (rows.cols() != config_.feature_dim()) {
    throw Error("descriptor width " + std::to_string(rows.cols()) + " does not match model input " +
                std::to_string(config_.feature_dim()));
  }
  if (rows.rows() == 0) throw Error("empty descriptor set");
}

Model::BatchOutput Model::forward(std::span<const Features* const> sets, Mode mode,
                                  bool with_reconstruction) {
  if (sets.empty()) throw Error("empty batch");
  offsets_.assign(1, 0);
  for (const Features* f : sets) {
    check_width(*f);
    offsets_.push_back(offsets_.back() + f->rows());
  }
  stacked_rows_ = offsets_.back();
  Tensor stacked(stacked_rows_, config_.feature_dim());
  for (std::size_t b = 0; b < sets.size(); ++b) {
    stacked.middleRows(offsets_[b], sets[b]->rows()) = *sets[b];
  }
  const Tensor features = shared_.forward(stacked, mode);

  BatchOutput out;
  out.latent.resize(static_cast<Eigen::Index>(sets.size()), config_.latent_dim());
  argmax_.resize(sets.size());
  for (std::size_t b = 0; b < sets.size(); ++b) {
    const Tensor block = features.middleRows(offsets_[b], offsets_[b + 1] - offsets_[b]);
    nn::MaxPoolResult pooled = nn::maxpool_rows(block);
    out.latent.row(static_cast<Eigen::Index>(b)) = pooled.values;
    argmax_[b] = std::move(pooled.argmax);
  }
  out.class_logits = classifier_.forward(out.latent, mode);
  decoder_active_ = with_reconstruction;
  if (with_reconstruction) out.voxel_logits = decoder_.forward(out.latent, mode);
  return out;
}

void Model::backward(const Tensor& grad_class, const Tensor* grad_voxel) {
  Tensor grad_latent = classifier_.backward(grad_class);
  if (grad_voxel != nullptr && grad_voxel->size() > 0) {
    if (!decoder_active_) throw Error("backward through decoder without a decoder forward");
    grad_latent += decoder_.backward(*grad_voxel);
  }
  Tensor grad_features = Tensor::Zero(stacked_rows_, config_.latent_dim());
  for (std::size_t b = 0; b < argmax_.size(); ++b) {
    for (Eigen::Index j = 0; j < grad_latent.cols(); ++j) {
      grad_features(offsets_[b] + argmax_[b][static_cast<std::size_t>(j)], j) +=
          grad_latent(static_cast<Eigen::Index>(b), j);
    }
  }
  shared_.backward(grad_features);
}

nn::RowVector Model::forward_latent(const Features& rows) {
  check_width(rows);
  return nn::maxpool_rows(shared_.forward(rows, Mode::kEval)).values;
}

Tensor Model::forward_classify(const Tensor& latent, Mode mode) {
  if (latent.cols() != config_.latent_dim()) throw Error("latent dimension mismatch");
  return classifier_.forward(latent, mode);
}

Tensor Model::forward_reconstruct(const Tensor& latent) {
  if (latent.cols() != config_.latent_dim()) throw Error("latent dimension mismatch");
  return decoder_.forward(latent, Mode::kEval);
}

std::vector<nn::Parameter*> Model::parameters() {
  std::vector<nn::Parameter*> out = shared_.parameters();
  for (auto* p : classifier_.parameters()) out.push_back(p);
  for (auto* p : decoder_.parameters()) out.push_back(p);
  return out;
}

nn::Checkpoint Model::to_checkpoint() {
  nn::Checkpoint ck;
  for (const nn::Parameter* p : parameters()) ck.add(nn::to_named(*p));
  ck.set_metadata("descriptor_kind", static_cast<double>(config_.kind));
  ck.set_metadata("architecture_hash", static_cast<double>(config_.architecture_hash()));
  ck.set_metadata("num_classes", config_.num_classes);
  ck.set_metadata("voxel_resolution", config_.voxel_resolution);
  return ck;
}

void Model::load(const nn::Checkpoint& checkpoint) {
  const auto params = parameters();
  nn::validate_parameters(checkpoint, params);
  if (checkpoint.has_metadata("architecture_hash") &&
      static_cast<std::uint32_t>(checkpoint.metadata("architecture_hash")) !=
          config_.architecture_hash()) {
    throw Error("architecture mismatch: checkpoint was trained with a different model config (" +
                config_.architecture() + ")");
  }
  nn::assign_parameters(checkpoint, params);
}

}  // namespace sparse3d
