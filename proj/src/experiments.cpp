#include "sparse3d/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sparse3d/error.hpp"

namespace sparse3d {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int argmax_row(const nn::Tensor& m, Eigen::Index row) {
  Eigen::Index best = 0;
  m.row(row).maxCoeff(&best);
  return static_cast<int>(best);
}

// Batches of `size`; a trailing single-object batch is merged into the
// previous one so batchnorm never sees one row.
std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += size) out.emplace_back(start, std::min(n, start + size));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

constexpr std::size_t kEvalBatch = 64;

}  // namespace

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::string s = "epoch,loss,classification_loss,reconstruction_loss,train_accuracy\n";
  for (const auto& m : log) {
    s += std::to_string(m.epoch) + "," + format_double(m.loss) + "," +
         format_double(m.classification_loss) + "," + format_double(m.reconstruction_loss) + "," +
         format_double(m.train_accuracy) + "\n";
  }
  return s;
}

TrainingResult run_training(const ExperimentConfig& config, const Dataset& dataset,
                            const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.train.empty()) throw Error("training split is empty");
  TrainingResult result;
  result.model = std::make_unique<Model>(config.model_config(dataset.num_classes()), config.seed);
  Model& model = *result.model;

  const bool reconstruct = config.recon_weight > 0.0;
  const auto objects = prepare_objects(dataset.train, config, reconstruct);
  const auto params = model.parameters();
  nn::Adam adam(params, nn::AdamOptions{config.learning_rate});
  const int voxels = model.config().voxel_count();

  std::vector<std::size_t> order(objects.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(config.seed, Stream::kShuffle, 0, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    std::size_t correct = 0;
    const auto batches = make_batches(order.size(), static_cast<std::size_t>(config.batch_size));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto [begin, end] = batches[b];
      const std::size_t count = end - begin;
      std::vector<DescriptorSet> sets;
      sets.reserve(count);
      std::vector<const Features*> rows;
      std::vector<int> labels;
      nn::Tensor targets;
      if (reconstruct) targets.resize(static_cast<Eigen::Index>(count), voxels);
      for (std::size_t i = begin; i < end; ++i) {
        const PreparedObject& obj = objects[order[i]];
        sets.push_back(object_descriptors(obj, config, config.train_rotation,
                                          static_cast<std::uint64_t>(epoch)));
        labels.push_back(obj.record->label);
        if (reconstruct) {
          const auto& occ = obj.target->occupancy;
          for (int v = 0; v < voxels; ++v) {
            targets(static_cast<Eigen::Index>(i - begin), v) = occ[static_cast<std::size_t>(v)];
          }
        }
      }
      for (const auto& s : sets) rows.push_back(&s.rows);

      const auto out = model.forward(rows, nn::Mode::kTrain, reconstruct);
      const MultitaskLoss loss =
          multitask_loss(out.class_logits, labels, reconstruct ? &out.voxel_logits : nullptr,
                         reconstruct ? &targets : nullptr, config.recon_weight);
      if (!std::isfinite(loss.total)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b) + " (classification " + format_double(loss.classification) +
                    ", reconstruction " + format_double(loss.reconstruction) + ")");
      }
      nn::zero_grad(params);
      model.backward(loss.grad_class, reconstruct ? &loss.grad_voxel : nullptr);
      adam.step();

      const double weight = static_cast<double>(count);
      metrics.loss += loss.total * weight;
      metrics.classification_loss += loss.classification * weight;
      metrics.reconstruction_loss += loss.reconstruction * weight;
      for (std::size_t i = 0; i < count; ++i) {
        correct += argmax_row(out.class_logits, static_cast<Eigen::Index>(i)) == labels[i];
      }
    }
    const double n = static_cast<double>(objects.size());
    metrics.loss /= n;
    metrics.classification_loss /= n;
    metrics.reconstruction_loss /= n;
    metrics.train_accuracy = static_cast<double>(correct) / n;
    result.log.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
    if (config.stop_train_accuracy > 0.0 && metrics.train_accuracy >= config.stop_train_accuracy) {
      break;
    }
  }
  return result;
}

nn::Checkpoint make_checkpoint(Model& model, const ExperimentConfig& config, int epoch) {
  nn::Checkpoint ck = model.to_checkpoint();
  ck.set_metadata("descriptor_count", config.descriptor.count);
  ck.set_metadata("points", config.points);
  ck.set_metadata("scale_norm", config.descriptor.scale_normalize ? 1.0 : 0.0);
  ck.set_metadata("fold_normals", config.descriptor.fold_normals ? 1.0 : 0.0);
  // Split into two exact halves; doubles hold 53-bit integers.
  ck.set_metadata("seed_lo", static_cast<double>(config.seed & 0xffffffffu));
  ck.set_metadata("seed_hi", static_cast<double>(config.seed >> 32));
  ck.set_metadata("epoch", epoch);
  return ck;
}

std::unique_ptr<Model> model_from_checkpoint(const nn::Checkpoint& checkpoint,
                                             const ExperimentConfig& config, int num_classes) {
  auto model = std::make_unique<Model>(config.model_config(num_classes), config.seed);
  if (checkpoint.has_metadata("descriptor_kind") &&
      static_cast<DescriptorKind>(static_cast<std::uint32_t>(
          checkpoint.metadata("descriptor_kind"))) != config.descriptor.kind) {
    throw Error("checkpoint descriptor kind does not match config");
  }
  model->load(checkpoint);
  return model;
}

nn::Tensor compute_latents(Model& model, const ExperimentConfig& config,
                           const std::vector<PreparedObject>& objects, RotationMode mode) {
  nn::Tensor latents(static_cast<Eigen::Index>(objects.size()), model.config().latent_dim());
  for (std::size_t start = 0; start < objects.size(); start += kEvalBatch) {
    const std::size_t end = std::min(objects.size(), start + kEvalBatch);
    std::vector<DescriptorSet> sets;
    std::vector<const Features*> rows;
    for (std::size_t i = start; i < end; ++i) {
      sets.push_back(object_descriptors(objects[i], config, mode, 0));
    }
    for (const auto& s : sets) rows.push_back(&s.rows);
    const auto out = model.forward(rows, nn::Mode::kEval, false);
    latents.middleRows(static_cast<Eigen::Index>(start), out.latent.rows()) = out.latent;
  }
  return latents;
}

std::string ClassificationReport::per_class_csv() const {
  std::string s = "class,correct,total,accuracy\n";
  std::vector<int> correct(class_names.size(), 0), total(class_names.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++total[static_cast<std::size_t>(labels[i])];
    correct[static_cast<std::size_t>(labels[i])] += predictions[i] == labels[i];
  }
  int all_correct = 0, all_total = 0;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const double acc = total[c] ? static_cast<double>(correct[c]) / total[c] : 0.0;
    s += class_names[c] + "," + std::to_string(correct[c]) + "," + std::to_string(total[c]) + "," +
         format_double(acc) + "\n";
    all_correct += correct[c];
    all_total += total[c];
  }
  s += "overall," + std::to_string(all_correct) + "," + std::to_string(all_total) + "," +
       format_double(accuracy) + "\n";
  return s;
}

ClassificationReport evaluate_classification(Model& model, const ExperimentConfig& config,
                                             const Dataset& dataset,
                                             const std::vector<ObjectRecord>& split,
                                             RotationMode mode) {
  if (model.config().num_classes != dataset.num_classes()) {
    throw Error("model has " + std::to_string(model.config().num_classes) + " classes, dataset " +
                std::to_string(dataset.num_classes()));
  }
  if (split.empty()) throw Error("evaluation split is empty");
  const auto objects = prepare_objects(split, config, false);
  const nn::Tensor latents = compute_latents(model, config, objects, mode);
  const nn::Tensor logits = model.forward_classify(latents, nn::Mode::kEval);
  ClassificationReport report;
  report.class_names = dataset.class_names;
  int correct = 0;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    report.labels.push_back(objects[i].record->label);
    report.predictions.push_back(argmax_row(logits, static_cast<Eigen::Index>(i)));
    correct += report.predictions.back() == report.labels.back();
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(objects.size());
  return report;
}

ClassificationReport evaluate_classification(Model& model, const ExperimentConfig& config,
                                             const Dataset& dataset) {
  return evaluate_classification(model, config, dataset, dataset.test, config.test_rotation);
}

RetrievalResult evaluate_retrieval(Model& model, const ExperimentConfig& config,
                                   const Dataset& dataset, std::span<const int> ks) {
  const auto objects = prepare_objects(dataset.test, config, false);
  const nn::Tensor latents = compute_latents(model, config, objects, config.test_rotation);
  std::vector<int> labels;
  for (const auto& o : objects) labels.push_back(o.record->label);
  return evaluate_retrieval(latents, labels, ks);
}

std::vector<ReconstructionItem> evaluate_reconstruction(Model& model,
                                                        const ExperimentConfig& config,
                                                        const Dataset& dataset,
                                                        std::span<const int> ids) {
  std::vector<ObjectRecord> chosen;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= dataset.test.size()) {
      throw Error("object id " + std::to_string(id) + " outside test split of " +
                  std::to_string(dataset.test.size()));
    }
    chosen.push_back(dataset.test[static_cast<std::size_t>(id)]);
  }
  const auto objects = prepare_objects(chosen, config, true);
  const nn::Tensor latents = compute_latents(model, config, objects, config.test_rotation);
  const nn::Tensor logits = model.forward_reconstruct(latents);
  std::vector<ReconstructionItem> out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    ReconstructionItem item;
    item.index = ids[i];
    item.name = objects[i].record->name;
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    item.predicted = decode_voxels(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                   config.voxel_resolution, config.voxel_threshold);
    item.target = *objects[i].target;
    item.iou = voxel_iou(item.predicted, item.target);
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const Dataset& dataset,
                                       const std::function<void(const AblationCell&)>& on_cell) {
  std::vector<AblationCell> cells;
  for (DescriptorKind kind : {DescriptorKind::kRawTriangle, DescriptorKind::kTypeA,
                              DescriptorKind::kTypeB, DescriptorKind::kTypeC}) {
    for (double weight : {0.0, 1.0}) {
      ExperimentConfig config = base;
      config.descriptor.kind = kind;
      config.recon_weight = weight;
      TrainingResult trained = run_training(config, dataset);
      AblationCell cell{kind, weight, evaluate_classification(*trained.model, config, dataset).accuracy};
      cells.push_back(cell);
      if (on_cell) on_cell(cell);
    }
  }
  return cells;
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
  std::string s = "descriptor,recon_weight,accuracy\n";
  for (const auto& c : cells) {
    s += to_string(c.kind) + "," + format_double(c.recon_weight) + "," + format_double(c.accuracy) +
         "\n";
  }
  return s;
}

std::vector<SweepRow> sparsity_sweep(const ExperimentConfig& base, const Dataset& dataset,
                                     std::span<const int> ks,
                                     const std::function<void(const SweepRow&)>& on_row) {
  std::vector<SweepRow> rows;
  for (int k : ks) {
    ExperimentConfig config = base;
    config.points = k;
    config.validate();
    TrainingResult trained = run_training(config, dataset);
    SweepRow row{k, evaluate_classification(*trained.model, config, dataset).accuracy};
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "k,accuracy\n";
  for (const auto& r : rows) s += std::to_string(r.points) + "," + format_double(r.accuracy) + "\n";
  return s;
}

}  // namespace sparse3d
