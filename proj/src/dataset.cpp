#include "sparse3d/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "sparse3d/error.hpp"

namespace sparse3d {

Dataset make_synth4(int train_per_class, int test_per_class) {
  Dataset d;
  d.name = "synth4";
  for (ShapeKind kind : kAllShapes) d.class_names.push_back(to_string(kind));
  std::uint64_t id = 0;
  auto fill = [&](std::vector<ObjectRecord>& split, int per_class, const char* tag) {
    for (std::size_t c = 0; c < kAllShapes.size(); ++c) {
      for (int i = 0; i < per_class; ++i) {
        ObjectRecord r;
        r.label = static_cast<int>(c);
        r.id = id++;
        r.shape = kAllShapes[c];
        r.name = d.class_names[c] + "_" + tag + "_" + std::to_string(i);
        split.push_back(std::move(r));
      }
    }
  };
  fill(d.train, train_per_class, "train");
  fill(d.test, test_per_class, "test");
  return d;
}

namespace {

std::vector<ObjectRecord> round_robin(std::vector<std::vector<ObjectRecord>> per_class, int limit) {
  std::vector<ObjectRecord> out;
  if (limit <= 0) {
    for (auto& v : per_class)
      for (auto& r : v) out.push_back(std::move(r));
    return out;
  }
  for (std::size_t i = 0; out.size() < static_cast<std::size_t>(limit); ++i) {
    bool any = false;
    for (auto& v : per_class) {
      if (i < v.size() && out.size() < static_cast<std::size_t>(limit)) {
        out.push_back(std::move(v[i]));
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

std::vector<ObjectRecord> limit_split(const std::vector<ObjectRecord>& split, int num_classes,
                                      int limit) {
  std::vector<std::vector<ObjectRecord>> per_class(static_cast<std::size_t>(num_classes));
  for (const auto& r : split) per_class[static_cast<std::size_t>(r.label)].push_back(r);
  return round_robin(std::move(per_class), limit);
}

}  // namespace

Dataset load_modelnet(const std::filesystem::path& root, int train_limit, int test_limit) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error("dataset directory not found: " + root.string());
  Dataset d;
  d.name = "modelnet40";
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) d.class_names.push_back(entry.path().filename().string());
  }
  std::sort(d.class_names.begin(), d.class_names.end());
  if (d.class_names.size() < 2) throw Error("dataset needs at least 2 class directories");

  std::uint64_t id = 0;
  auto load_split = [&](const char* split, int limit) {
    std::vector<std::vector<ObjectRecord>> per_class(d.class_names.size());
    for (std::size_t c = 0; c < d.class_names.size(); ++c) {
      const fs::path dir = root / d.class_names[c] / split;
      if (!fs::is_directory(dir)) continue;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".off") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        ObjectRecord r;
        r.label = static_cast<int>(c);
        r.name = f.string();  // replaced by the stem once loaded
        per_class[c].push_back(std::move(r));
      }
    }
    auto records = round_robin(std::move(per_class), limit);
    // Meshes are parsed only for the objects that survive the limit.
    for (auto& r : records) {
      r.mesh = std::make_shared<const TriangleMesh>(normalize_mesh(load_off(r.name)));
      r.name = fs::path(r.name).stem().string();
      r.id = id++;
    }
    return records;
  };
  d.train = load_split("train", train_limit);
  d.test = load_split("test", test_limit);
  if (d.train.empty()) throw Error("no training meshes under " + root.string());
  return d;
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.dataset == "synth4") {
    Dataset d = make_synth4(config.synth_train_per_class, config.synth_test_per_class);
    if (config.train_limit > 0) d.train = limit_split(d.train, d.num_classes(), config.train_limit);
    if (config.test_limit > 0) d.test = limit_split(d.test, d.num_classes(), config.test_limit);
    return d;
  }
  std::string root = config.data_root;
  if (root.empty()) {
    if (const char* env = std::getenv("SPARSE3D_DATA")) root = env;
  }
  if (root.empty()) throw Error("modelnet40 needs data_root or SPARSE3D_DATA");
  return load_modelnet(root, config.train_limit, config.test_limit);
}

PointCloud sample_object(const ObjectRecord& object, int k, Rng& rng) {
  if (object.mesh) return sample_surface(*object.mesh, k, rng);
  return synth_shape(object.shape, k, rng);
}

VoxelGrid canonical_voxels(const ObjectRecord& object, int resolution, std::uint64_t seed) {
  if (object.mesh) {
    Rng rng = make_rng(seed, Stream::kVoxel, object.id);
    return voxelize(*object.mesh, resolution, rng);
  }
  // Every synthetic object of a class shares one target.
  Rng rng = make_rng(seed, Stream::kVoxel, static_cast<std::uint64_t>(object.shape));
  return voxelize(synth_shape(object.shape, dense_sample_count(resolution), rng).points,
                  resolution);
}

std::vector<PreparedObject> prepare_objects(const std::vector<ObjectRecord>& objects,
                                            const ExperimentConfig& config, bool with_targets) {
  std::vector<PreparedObject> out;
  out.reserve(objects.size());
  std::map<int, std::shared_ptr<const VoxelGrid>> synth_targets;
  for (const auto& record : objects) {
    PreparedObject p;
    p.record = &record;
    Rng rng = make_rng(config.seed, Stream::kPoints, record.id);
    p.cloud = sample_object(record, config.points, rng);
    if (with_targets) {
      if (record.mesh) {
        p.target = std::make_shared<const VoxelGrid>(
            canonical_voxels(record, config.voxel_resolution, config.seed));
      } else {
        auto& cached = synth_targets[static_cast<int>(record.shape)];
        if (!cached) {
          cached = std::make_shared<const VoxelGrid>(
              canonical_voxels(record, config.voxel_resolution, config.seed));
        }
        p.target = cached;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

DescriptorSet object_descriptors(const PreparedObject& object, const ExperimentConfig& config,
                                 RotationMode mode, std::uint64_t epoch) {
  const std::uint64_t id = object.record->id;
  PointCloud resampled;
  const PointCloud* cloud = &object.cloud;
  if (config.resample_points && epoch > 0) {
    Rng rng = make_rng(config.seed, Stream::kPoints, id, epoch);
    resampled = sample_object(*object.record, config.points, rng);
    cloud = &resampled;
  }
  Rng rotation_rng = make_rng(config.seed, Stream::kRotation, id, epoch);
  const Mat3 rotation = random_rotation(mode, rotation_rng);
  const PointCloud posed = apply_rigid(*cloud, rotation);
  Rng descriptor_rng = make_rng(config.seed, Stream::kDescriptor, id, epoch);
  return build_descriptor_set(posed, config.descriptor, descriptor_rng);
}

}  // namespace sparse3d
