#ifndef SPARSE3D_GEOMETRY_HPP_
#define SPARSE3D_GEOMETRY_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sparse3d/rng.hpp"

namespace sparse3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  // Throws Error if a face index is out of range, a face repeats a vertex, or
  // there are no faces.
  void validate() const;
  double face_area(std::size_t f) const;
  double total_area() const;
};

// K oriented surface samples. Rows of `normals` are unit length.
struct PointCloud {
  Points points;
  Points normals;

  PointCloud() = default;
  explicit PointCloud(Eigen::Index k) : points(k, 3), normals(k, 3) {}

  Eigen::Index size() const { return points.rows(); }
  Vec3 point(Eigen::Index i) const { return points.row(i).transpose(); }
  Vec3 normal(Eigen::Index i) const { return normals.row(i).transpose(); }
};

enum class RotationMode { kNone, kAroundZ, kSO3 };

RotationMode parse_rotation_mode(std::string_view name);
std::string to_string(RotationMode mode);

// Occupancy over the unit cube [0,1]^3, which is the image of the normalized
// object box [-0.5,0.5]^3. Cells are half-open; the upper face clamps into the
// last cell.
struct VoxelGrid {
  int resolution = 0;
  std::vector<std::uint8_t> occupancy;

  VoxelGrid() = default;
  explicit VoxelGrid(int r)
      : resolution(r), occupancy(static_cast<std::size_t>(r) * r * r, 0) {}

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution + j) * resolution + k;
  }
  bool at(int i, int j, int k) const { return occupancy[index(i, j, k)] != 0; }
  std::size_t occupied_count() const;
  // Cell index along one axis for a coordinate in model units.
  int cell_of(double coordinate) const;
};

double voxel_iou(const VoxelGrid& predicted, const VoxelGrid& target);

// "SPV1" dump: magic, u32 R, R^3 bytes in {0,1}.
void write_voxels(std::ostream& out, const VoxelGrid& grid);
VoxelGrid read_voxels(std::istream& in);

// OFF text. Accepts the ModelNet variant with counts glued to the header
// ("OFF490 518 0"). Only triangular faces are accepted.
TriangleMesh parse_off(std::istream& in);
TriangleMesh parse_off(std::string_view text);
TriangleMesh load_off(const std::filesystem::path& path);
void write_off(std::ostream& out, const TriangleMesh& mesh);

// Centroid of the vertex set to the origin, max vertex radius 0.5.
TriangleMesh normalize_mesh(const TriangleMesh& mesh);

// Area-weighted i.i.d. surface samples; normals are the unit face normals
// given by counter-clockwise winding.
PointCloud sample_surface(const TriangleMesh& mesh, int k, Rng& rng);

Mat3 random_rotation(RotationMode mode, Rng& rng);

PointCloud apply_rigid(const PointCloud& cloud, const Mat3& rotation,
                       const Vec3& translation = Vec3::Zero());

int dense_sample_count(int resolution);

VoxelGrid voxelize(const Points& points, int resolution);
// Samples dense_sample_count(resolution) surface points from the mesh.
VoxelGrid voxelize(const TriangleMesh& mesh, int resolution, Rng& rng);

enum class ShapeKind { kSphere, kCube, kCylinder, kTorus };

inline constexpr std::array<ShapeKind, 4> kAllShapes = {
    ShapeKind::kSphere, ShapeKind::kCube, ShapeKind::kCylinder, ShapeKind::kTorus};

std::string to_string(ShapeKind kind);

// Torus proportions after normalization.
inline constexpr double kTorusMajorRadius = 0.35;
inline constexpr double kTorusMinorRadius = 0.15;

// Analytic area-uniform surface samples with exact normals, already at the
// normalized scale (max radius 0.5, centered).
PointCloud synth_shape(ShapeKind kind, int k, Rng& rng);

// Pairwise-distance helper used by isometry checks.
Eigen::MatrixXd pairwise_distances(const Points& points);

}  // namespace sparse3d

#endif  // SPARSE3D_GEOMETRY_HPP_
