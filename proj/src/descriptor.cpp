#include "sparse3d/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include <Eigen/Geometry>

#include "sparse3d/binary_io.hpp"
#include "sparse3d/error.hpp"

namespace sparse3d {

int feature_width(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::kRawTriangle: return 3;
    case DescriptorKind::kTypeA: return 4;
    case DescriptorKind::kTypeB: return 12;
    case DescriptorKind::kTypeC: return 18;
  }
  throw Error("unknown descriptor kind");
}

int points_per_descriptor(DescriptorKind kind) {
  return kind == DescriptorKind::kTypeA ? 2 : 3;
}

DescriptorKind parse_descriptor_kind(std::string_view name) {
  if (name == "raw") return DescriptorKind::kRawTriangle;
  if (name == "a" || name == "A") return DescriptorKind::kTypeA;
  if (name == "b" || name == "B") return DescriptorKind::kTypeB;
  if (name == "c" || name == "C") return DescriptorKind::kTypeC;
  throw Error("unknown descriptor kind '" + std::string(name) + "' (raw|a|b|c)");
}

std::string to_string(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::kRawTriangle: return "raw";
    case DescriptorKind::kTypeA: return "a";
    case DescriptorKind::kTypeB: return "b";
    case DescriptorKind::kTypeC: return "c";
  }
  return "?";
}

const std::vector<ColumnRole>& column_roles(DescriptorKind kind) {
  using R = ColumnRole;
  static const std::vector<R> raw = {R::kLength, R::kLength, R::kLength};
  static const std::vector<R> a = {R::kLength, R::kNormalAngle, R::kNormalAngle, R::kNormalAngle};
  static const std::vector<R> b = [] {
    std::vector<R> roles;
    for (int e = 0; e < 3; ++e) roles.insert(roles.end(), a.begin(), a.end());
    return roles;
  }();
  static const std::vector<R> c = [] {
    std::vector<R> roles = b;
    roles.insert(roles.end(), {R::kLength, R::kLength, R::kLength, R::kInteriorAngle,
                               R::kInteriorAngle, R::kInteriorAngle});
    return roles;
  }();
  switch (kind) {
    case DescriptorKind::kRawTriangle: return raw;
    case DescriptorKind::kTypeA: return a;
    case DescriptorKind::kTypeB: return b;
    case DescriptorKind::kTypeC: return c;
  }
  throw Error("unknown descriptor kind");
}

double vector_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool is_degenerate_pair(const Vec3& p1, const Vec3& p2) {
  return !((p2 - p1).norm() >= kDegenerateTolerance);
}

bool is_degenerate_triangle(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  if (is_degenerate_pair(p1, p2) || is_degenerate_pair(p2, p3) || is_degenerate_pair(p3, p1)) {
    return true;
  }
  return !(0.5 * (p2 - p1).cross(p3 - p1).norm() >= kDegenerateTolerance);
}

std::array<double, 4> type_a(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  if (is_degenerate_pair(p1, p2)) throw Error("degenerate pair");
  const Vec3 e = p2 - p1;
  return {e.norm(), vector_angle(n1, e), vector_angle(n2, e), vector_angle(n1, n2)};
}

namespace {

// TypeB features for the triangle in the given vertex order.
std::array<double, 12> oriented_pairs(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                                      const Vec3& n2, const Vec3& p3, const Vec3& n3) {
  const Vec3* p[3] = {&p1, &p2, &p3};
  const Vec3* n[3] = {&n1, &n2, &n3};
  std::array<double, 12> out{};
  for (int e = 0; e < 3; ++e) {
    const int i = e, j = (e + 1) % 3;
    const Vec3 edge = *p[j] - *p[i];
    out[4 * e + 0] = edge.norm();
    out[4 * e + 1] = vector_angle(*n[i], edge);
    out[4 * e + 2] = vector_angle(*n[j], -edge);
    out[4 * e + 3] = vector_angle(*n[i], *n[j]);
  }
  return out;
}

constexpr std::array<std::array<int, 3>, 6> kPermutations = {{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

void require_triangle(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  if (is_degenerate_triangle(p1, p2, p3)) throw Error("degenerate triangle");
}

}  // namespace

std::array<int, 3> canonical_order(const Triple& t) {
  double d[3][3];
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) d[a][b] = (t[a].position - t[b].position).norm();
  }
  std::array<int, 3> best{};
  std::array<double, 12> best_features{};
  bool found = false;
  int candidates = 0;
  for (const auto& perm : kPermutations) {
    const int i = perm[0], j = perm[1], k = perm[2];
    if (!(d[j][k] <= d[k][i] && d[k][i] <= d[i][j])) continue;
    ++candidates;
    if (!found) {
      best = perm;
      found = true;
      continue;
    }
    if (candidates == 2) {
      best_features = oriented_pairs(t[best[0]].position, t[best[0]].normal, t[best[1]].position,
                                     t[best[1]].normal, t[best[2]].position, t[best[2]].normal);
    }
    const auto features = oriented_pairs(t[i].position, t[i].normal, t[j].position, t[j].normal,
                                         t[k].position, t[k].normal);
    if (std::lexicographical_compare(features.begin(), features.end(), best_features.begin(),
                                     best_features.end())) {
      best = perm;
      best_features = features;
    }
  }
  return best;
}

Triple canonicalize(const Triple& triple) {
  const auto order = canonical_order(triple);
  return {triple[order[0]], triple[order[1]], triple[order[2]]};
}

std::array<double, 12> type_b(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2,
                              const Vec3& p3, const Vec3& n3) {
  require_triangle(p1, p2, p3);
  const Triple c = canonicalize({{{p1, n1}, {p2, n2}, {p3, n3}}});
  return oriented_pairs(c[0].position, c[0].normal, c[1].position, c[1].normal, c[2].position,
                        c[2].normal);
}

std::array<double, 18> type_c(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2,
                              const Vec3& p3, const Vec3& n3) {
  require_triangle(p1, p2, p3);
  const Triple c = canonicalize({{{p1, n1}, {p2, n2}, {p3, n3}}});
  const auto pairs = oriented_pairs(c[0].position, c[0].normal, c[1].position, c[1].normal,
                                    c[2].position, c[2].normal);
  std::array<double, 18> out{};
  std::copy(pairs.begin(), pairs.end(), out.begin());
  const Vec3 centroid = (c[0].position + c[1].position + c[2].position) / 3.0;
  for (int v = 0; v < 3; ++v) {
    const Vec3& here = c[v].position;
    const Vec3& next = c[(v + 1) % 3].position;
    const Vec3& prev = c[(v + 2) % 3].position;
    out[12 + v] = (here - centroid).norm();
    out[15 + v] = vector_angle(next - here, prev - here);
  }
  return out;
}

std::array<double, 3> raw_triangle(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  require_triangle(p1, p2, p3);
  std::array<double, 3> sides = {(p2 - p1).norm(), (p3 - p2).norm(), (p1 - p3).norm()};
  std::sort(sides.begin(), sides.end());
  return sides;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) result = result * (n - k + i) / i;
  return result;
}

void compute_row(const PointCloud& cloud, DescriptorKind kind, const std::array<int, 3>& idx,
                 double* out) {
  const Vec3 p1 = cloud.point(idx[0]), n1 = cloud.normal(idx[0]);
  const Vec3 p2 = cloud.point(idx[1]), n2 = cloud.normal(idx[1]);
  switch (kind) {
    case DescriptorKind::kTypeA: {
      const auto f = type_a(p1, n1, p2, n2);
      std::copy(f.begin(), f.end(), out);
      return;
    }
    case DescriptorKind::kRawTriangle: {
      const auto f = raw_triangle(p1, p2, cloud.point(idx[2]));
      std::copy(f.begin(), f.end(), out);
      return;
    }
    case DescriptorKind::kTypeB: {
      const auto f = type_b(p1, n1, p2, n2, cloud.point(idx[2]), cloud.normal(idx[2]));
      std::copy(f.begin(), f.end(), out);
      return;
    }
    case DescriptorKind::kTypeC: {
      const auto f = type_c(p1, n1, p2, n2, cloud.point(idx[2]), cloud.normal(idx[2]));
      std::copy(f.begin(), f.end(), out);
      return;
    }
  }
}

namespace {

using Combo = std::array<int, 3>;

bool combo_degenerate(const PointCloud& cloud, const Combo& c, int arity) {
  if (arity == 2) return is_degenerate_pair(cloud.point(c[0]), cloud.point(c[1]));
  return is_degenerate_triangle(cloud.point(c[0]), cloud.point(c[1]), cloud.point(c[2]));
}

std::vector<Combo> all_combinations(int k, int arity) {
  std::vector<Combo> out;
  if (arity == 2) {
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) out.push_back({i, j, -1});
  } else {
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        for (int l = j + 1; l < k; ++l) out.push_back({i, j, l});
  }
  return out;
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

// Rows from a pool of valid combinations in random order: take the first
// `count` when the pool is large enough, otherwise repeat every combination
// count / |pool| times and append count % |pool| from the front.
std::vector<Combo> fill_from_pool(const std::vector<Combo>& pool, std::size_t count) {
  if (pool.empty()) throw Error("no non-degenerate point combinations in cloud");
  if (pool.size() >= count) return {pool.begin(), pool.begin() + static_cast<long>(count)};
  std::vector<Combo> out;
  out.reserve(count);
  const std::size_t reps = count / pool.size();
  for (const auto& c : pool)
    for (std::size_t r = 0; r < reps; ++r) out.push_back(c);
  const std::size_t extras = count % pool.size();
  out.insert(out.end(), pool.begin(), pool.begin() + static_cast<long>(extras));
  return out;
}

// Pools up to this size are enumerated and shuffled instead of rejection sampled.
constexpr std::uint64_t kEnumerationLimit = 200000;

}  // namespace

std::vector<std::array<int, 3>> select_combinations(const PointCloud& cloud,
                                                    const DescriptorOptions& options, Rng& rng) {
  const int arity = points_per_descriptor(options.kind);
  const int k = static_cast<int>(cloud.size());
  if (k < arity) throw Error("need ≥ " + std::to_string(arity) + " points");
  if (options.count < 1) throw Error("descriptor count must be >= 1");
  const std::uint64_t count = static_cast<std::uint64_t>(options.count);
  const std::uint64_t unique = binomial(static_cast<std::uint64_t>(k), arity);

  if (unique <= std::max<std::uint64_t>(kEnumerationLimit, 4 * count)) {
    auto combos = all_combinations(k, arity);
    fisher_yates(combos, rng);
    std::vector<Combo> pool;
    pool.reserve(std::min<std::size_t>(combos.size(), count));
    for (const auto& c : combos) {
      if (combo_degenerate(cloud, c, arity)) continue;
      pool.push_back(c);
      // Enough rows, and more than the full pool would only be reordered.
      if (pool.size() == count && count <= unique) break;
    }
    return fill_from_pool(pool, count);
  }

  // Large pools: uniform random subsets, rejecting repeats.
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::unordered_set<std::uint64_t> tried;
  std::vector<Combo> pool;
  const std::uint64_t max_attempts = 100 * count + 1000;
  for (std::uint64_t attempt = 0; attempt < max_attempts && pool.size() < count; ++attempt) {
    Combo c{pick(rng), pick(rng), arity == 3 ? pick(rng) : -1};
    if (c[0] == c[1] || (arity == 3 && (c[2] == c[0] || c[2] == c[1]))) continue;
    std::sort(c.begin(), c.begin() + arity);
    const std::uint64_t key =
        (static_cast<std::uint64_t>(c[0]) * k + c[1]) * k + (arity == 3 ? c[2] : 0);
    if (!tried.insert(key).second) continue;
    if (combo_degenerate(cloud, c, arity)) continue;
    pool.push_back(c);
  }
  return fill_from_pool(pool, count);
}

DescriptorSet build_descriptor_set(const PointCloud& cloud, const DescriptorOptions& options,
                                   Rng& rng) {
  const auto combos = select_combinations(cloud, options, rng);
  const int width = feature_width(options.kind);
  DescriptorSet set;
  set.kind = options.kind;
  set.rows.resize(static_cast<Eigen::Index>(combos.size()), width);
  for (std::size_t r = 0; r < combos.size(); ++r) {
    compute_row(cloud, options.kind, combos[r], set.rows.row(static_cast<Eigen::Index>(r)).data());
  }

  const auto& roles = column_roles(options.kind);
  if (options.fold_normals) {
    for (int c = 0; c < width; ++c) {
      if (roles[c] != ColumnRole::kNormalAngle) continue;
      for (Eigen::Index r = 0; r < set.rows.rows(); ++r) {
        double& v = set.rows(r, c);
        v = std::min(v, std::numbers::pi - v);
      }
    }
    set.folded_normals = true;
  }
  if (options.scale_normalize) {
    // d_max is taken over triangle sides / pair distances; centroid
    // distances are shorter than the longest side so the max stays 1.
    const int side_columns = options.kind == DescriptorKind::kTypeC ? 12 : width;
    double d_max = 0.0;
    for (int c = 0; c < side_columns; ++c) {
      if (roles[c] == ColumnRole::kLength) d_max = std::max(d_max, set.rows.col(c).maxCoeff());
    }
    for (int c = 0; c < width; ++c) {
      if (roles[c] == ColumnRole::kLength) set.rows.col(c) /= d_max;
    }
    set.scale_normalized = true;
  }
  return set;
}

namespace {
constexpr char kDescriptorMagic[] = "SPD1";
constexpr std::uint32_t kFlagScaleNormalized = 1u;
constexpr std::uint32_t kFlagFoldedNormals = 2u;
}  // namespace

void write_descriptor_set(std::ostream& out, const DescriptorSet& set) {
  binary::write_magic(out, kDescriptorMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(set.kind));
  binary::write_u32(out, static_cast<std::uint32_t>(set.count()));
  binary::write_u32(out, static_cast<std::uint32_t>(set.width()));
  std::uint32_t flags = 0;
  if (set.scale_normalized) flags |= kFlagScaleNormalized;
  if (set.folded_normals) flags |= kFlagFoldedNormals;
  binary::write_u32(out, flags);
  for (Eigen::Index r = 0; r < set.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < set.rows.cols(); ++c) {
      binary::write_f32(out, static_cast<float>(set.rows(r, c)));
    }
  }
}

DescriptorSet read_descriptor_set(std::istream& in) {
  binary::expect_magic(in, kDescriptorMagic);
  const std::uint32_t kind = binary::read_u32(in);
  if (kind > static_cast<std::uint32_t>(DescriptorKind::kTypeC)) {
    throw FormatError("unknown descriptor kind " + std::to_string(kind));
  }
  DescriptorSet set;
  set.kind = static_cast<DescriptorKind>(kind);
  const std::uint32_t count = binary::read_u32(in);
  const std::uint32_t width = binary::read_u32(in);
  if (static_cast<int>(width) != feature_width(set.kind)) {
    throw FormatError("descriptor width " + std::to_string(width) + " does not match kind " +
                      to_string(set.kind));
  }
  const std::uint32_t flags = binary::read_u32(in);
  set.scale_normalized = (flags & kFlagScaleNormalized) != 0;
  set.folded_normals = (flags & kFlagFoldedNormals) != 0;
  set.rows.resize(count, width);
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < width; ++c) set.rows(r, c) = binary::read_f32(in);
  }
  return set;
}

}  // namespace sparse3d
