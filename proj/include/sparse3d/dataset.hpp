#ifndef SPARSE3D_DATASET_HPP_
#define SPARSE3D_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sparse3d/config.hpp"
#include "sparse3d/descriptor.hpp"
#include "sparse3d/geometry.hpp"

namespace sparse3d {

// One object of a split. Synthetic objects are an analytic shape; ModelNet
// objects carry their normalized mesh.
struct ObjectRecord {
  int label = 0;
  std::uint64_t id = 0;  // unique across splits; seeds per-object randomness
  std::string name;
  ShapeKind shape = ShapeKind::kSphere;
  std::shared_ptr<const TriangleMesh> mesh;
};

struct Dataset {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<ObjectRecord> train;
  std::vector<ObjectRecord> test;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Classes sphere, cube, cylinder, torus; splits listed class-major.
Dataset make_synth4(int train_per_class, int test_per_class);

// <root>/<class>/{train,test}/*.off, classes and files in sorted order.
// `limit` > 0 keeps only the first objects of each split after interleaving
// the classes round-robin.
Dataset load_modelnet(const std::filesystem::path& root, int train_limit = 0, int test_limit = 0);

// Dataset named by the config (synth4, or modelnet40 under data_root or
// $SPARSE3D_DATA), with train_limit/test_limit applied.
Dataset load_dataset(const ExperimentConfig& config);

// K oriented surface samples of an object in canonical pose.
PointCloud sample_object(const ObjectRecord& object, int k, Rng& rng);

// Canonical-pose occupancy target.
VoxelGrid canonical_voxels(const ObjectRecord& object, int resolution, std::uint64_t seed);

// Per-object inputs for a split: fixed K-point clouds and optional targets.
struct PreparedObject {
  const ObjectRecord* record = nullptr;
  PointCloud cloud;
  std::shared_ptr<const VoxelGrid> target;
};

std::vector<PreparedObject> prepare_objects(const std::vector<ObjectRecord>& objects,
                                            const ExperimentConfig& config, bool with_targets);

// Descriptor set of one object for one pass: rotation drawn from `mode`
// applied before extraction. Rotation and combination sampling use separate
// streams, so the same (seed, epoch) selects the same combinations whatever
// the rotation mode.
DescriptorSet object_descriptors(const PreparedObject& object, const ExperimentConfig& config,
                                 RotationMode mode, std::uint64_t epoch);

}  // namespace sparse3d

#endif  // SPARSE3D_DATASET_HPP_
