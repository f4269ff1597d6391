#ifndef SPARSE3D_CONFIG_HPP_
#define SPARSE3D_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sparse3d/descriptor.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/model.hpp"

namespace sparse3d {

// One training/evaluation run. Serialized as flat "key = value" lines; '#'
// starts a comment.
struct ExperimentConfig {
  std::string dataset = "synth4";  // synth4 | modelnet40
  std::string data_root;           // ModelNet40 directory, default $SPARSE3D_DATA
  int points = 16;                 // K
  RotationMode train_rotation = RotationMode::kSO3;
  RotationMode test_rotation = RotationMode::kSO3;
  DescriptorOptions descriptor{DescriptorKind::kTypeC, 512, false, false};

  std::vector<int> shared_widths = {64, 128, 1024};
  std::vector<int> classifier_widths = {512, 256};
  std::vector<int> decoder_widths = {1024, 2048};
  double dropout = 0.3;
  int voxel_resolution = 16;
  double recon_weight = 1.0;
  bool batchnorm = true;

  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  int synth_train_per_class = 400;
  int synth_test_per_class = 100;
  int train_limit = 0;  // 0 = whole split
  int test_limit = 0;
  bool resample_points = false;     // fresh K-point sample every epoch
  double stop_train_accuracy = 0.0; // stop once an epoch reaches this (0 = never)
  double voxel_threshold = 0.2;

  void validate() const;
  ModelConfig model_config(int num_classes) const;
  std::string to_text() const;
};

// Applies one key/value pair; throws Error on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<int> parse_int_list(std::string_view text);

}  // namespace sparse3d

#endif  // SPARSE3D_CONFIG_HPP_
