#ifndef SPARSE3D_DESCRIPTOR_HPP_
#define SPARSE3D_DESCRIPTOR_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sparse3d/geometry.hpp"
#include "sparse3d/rng.hpp"

namespace sparse3d {

// RawTriangle: sorted side lengths. TypeA: one oriented point pair.
// TypeB: three oriented pairs of a canonically ordered triangle. TypeC: TypeB
// plus vertex-to-centroid distances and interior angles.
enum class DescriptorKind : std::uint32_t { kRawTriangle = 0, kTypeA = 1, kTypeB = 2, kTypeC = 3 };

int feature_width(DescriptorKind kind);
int points_per_descriptor(DescriptorKind kind);
DescriptorKind parse_descriptor_kind(std::string_view name);
std::string to_string(DescriptorKind kind);

enum class ColumnRole { kLength, kNormalAngle, kInteriorAngle };
// Role of each feature column, in order.
const std::vector<ColumnRole>& column_roles(DescriptorKind kind);

// Pair distance or triangle area below this is degenerate.
inline constexpr double kDegenerateTolerance = 1e-12;

using Features = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Angle between two (not necessarily unit) vectors in [0, pi], computed as
// atan2(|a x b|, a.b).
double vector_angle(const Vec3& a, const Vec3& b);

std::array<double, 4> type_a(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);
std::array<double, 12> type_b(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2,
                              const Vec3& p3, const Vec3& n3);
std::array<double, 18> type_c(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2,
                              const Vec3& p3, const Vec3& n3);
std::array<double, 3> raw_triangle(const Vec3& p1, const Vec3& p2, const Vec3& p3);

struct OrientedPoint {
  Vec3 position;
  Vec3 normal;
};
using Triple = std::array<OrientedPoint, 3>;

bool is_degenerate_pair(const Vec3& p1, const Vec3& p2);
bool is_degenerate_triangle(const Vec3& p1, const Vec3& p2, const Vec3& p3);

// Permutation `order` such that (t[order[0]], t[order[1]], t[order[2]]) has
// the side opposite vertex 1 shortest and opposite vertex 3 longest.
// Remaining ties pick the lexicographically smallest TypeB feature vector.
std::array<int, 3> canonical_order(const Triple& triple);
Triple canonicalize(const Triple& triple);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

struct DescriptorOptions {
  DescriptorKind kind = DescriptorKind::kTypeC;
  int count = 512;
  bool scale_normalize = false;
  bool fold_normals = false;
};

struct DescriptorSet {
  DescriptorKind kind = DescriptorKind::kTypeC;
  bool scale_normalized = false;
  bool folded_normals = false;
  Features rows;

  int count() const { return static_cast<int>(rows.rows()); }
  int width() const { return static_cast<int>(rows.cols()); }
};

// One descriptor row for an explicit point tuple (2 or 3 indices into the cloud).
void compute_row(const PointCloud& cloud, DescriptorKind kind, const std::array<int, 3>& indices,
                 double* out);

// Fixed-size set of descriptors over distinct point combinations. When the
// requested count exceeds the number of combinations each combination is
// repeated count / U times and count % U extras are drawn without replacement.
DescriptorSet build_descriptor_set(const PointCloud& cloud, const DescriptorOptions& options,
                                   Rng& rng);

// Combination indices selected by build_descriptor_set, exposed for tests.
std::vector<std::array<int, 3>> select_combinations(const PointCloud& cloud,
                                                    const DescriptorOptions& options, Rng& rng);

// "SPD1" cache: magic, u32 kind, count, width, flags, then float32 rows.
void write_descriptor_set(std::ostream& out, const DescriptorSet& set);
DescriptorSet read_descriptor_set(std::istream& in);

}  // namespace sparse3d

#endif  // SPARSE3D_DESCRIPTOR_HPP_
