#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "sparse3d/descriptor.hpp"
#include "sparse3d/error.hpp"

using namespace sparse3d;
using std::numbers::pi;

namespace {

PointCloud random_cloud(int k, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud c(k);
  for (int i = 0; i < k; ++i) {
    c.points.row(i) << g(rng), g(rng), g(rng);
    Vec3 n(g(rng), g(rng), g(rng));
    c.normals.row(i) = n.normalized().transpose();
  }
  return c;
}

// Plain arccos angle, independent of the library's formulation.
double acos_angle(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
}

std::array<double, 18> oracle_type_c(const Vec3* p, const Vec3* n) {
  std::array<double, 18> f{};
  for (int e = 0; e < 3; ++e) {
    const int i = e, j = (e + 1) % 3;
    const Vec3 u = (p[j] - p[i]).normalized();
    f[4 * e] = (p[j] - p[i]).norm();
    f[4 * e + 1] = acos_angle(n[i], u);
    f[4 * e + 2] = acos_angle(n[j], -u);
    f[4 * e + 3] = acos_angle(n[i], n[j]);
  }
  const Vec3 c = (p[0] + p[1] + p[2]) / 3.0;
  for (int v = 0; v < 3; ++v) {
    f[12 + v] = (p[v] - c).norm();
    f[15 + v] = acos_angle(p[(v + 1) % 3] - p[v], p[(v + 2) % 3] - p[v]);
  }
  return f;
}

}  // namespace

TEST_CASE("feature widths and kind names") {
  CHECK(feature_width(DescriptorKind::kRawTriangle) == 3);
  CHECK(feature_width(DescriptorKind::kTypeA) == 4);
  CHECK(feature_width(DescriptorKind::kTypeB) == 12);
  CHECK(feature_width(DescriptorKind::kTypeC) == 18);
  for (auto k : {DescriptorKind::kRawTriangle, DescriptorKind::kTypeA, DescriptorKind::kTypeB,
                 DescriptorKind::kTypeC}) {
    CHECK(parse_descriptor_kind(to_string(k)) == k);
    CHECK(column_roles(k).size() == static_cast<std::size_t>(feature_width(k)));
  }
  CHECK_THROWS_AS(parse_descriptor_kind("d"), Error);
}

TEST_CASE("type A on simple configurations") {
  const auto a = type_a(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(1, 0, 0));
  CHECK(a == std::array<double, 4>{2, 0, 0, 0});
  const auto b = type_a(Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0));
  CHECK(b[0] == 1.0);
  CHECK(b[1] == doctest::Approx(pi / 2));
  CHECK(b[2] == doctest::Approx(pi / 2));
  CHECK(b[3] == doctest::Approx(pi / 2));
  CHECK_THROWS_WITH(type_a(Vec3(1, 2, 3), Vec3(1, 0, 0), Vec3(1, 2, 3), Vec3(0, 1, 0)),
                    "degenerate pair");
}

TEST_CASE("type B and C on an equilateral triangle") {
  const Vec3 p[3] = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)};
  const Vec3 n(0, 0, 1);
  const auto b = type_b(p[0], n, p[1], n, p[2], n);
  for (int e = 0; e < 3; ++e) {
    CHECK(b[4 * e] == doctest::Approx(1.0));
    CHECK(b[4 * e + 1] == doctest::Approx(pi / 2));
    CHECK(b[4 * e + 2] == doctest::Approx(pi / 2));
    CHECK(b[4 * e + 3] == 0.0);
  }
  const auto c = type_c(p[0], n, p[1], n, p[2], n);
  for (int v = 0; v < 3; ++v) {
    CHECK(c[12 + v] == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(c[15 + v] == doctest::Approx(pi / 3));
  }
}

TEST_CASE("type C on a right isosceles triangle matches vector arithmetic") {
  // Legs of length 1 along x and y with tilted, distinct normals.
  const Vec3 p[3] = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const Vec3 n[3] = {Vec3(0.2, 0.1, 1).normalized(), Vec3(-0.3, 0.4, 1).normalized(),
                     Vec3(0.1, -0.5, 1).normalized()};
  const auto got = type_c(p[0], n[0], p[1], n[1], p[2], n[2]);

  // The hypotenuse is the longest side, so the right-angle vertex is third;
  // the two acute vertices tie on side lengths and the smaller feature vector wins.
  const Vec3 o1[3] = {p[1], p[2], p[0]}, m1[3] = {n[1], n[2], n[0]};
  const Vec3 o2[3] = {p[2], p[1], p[0]}, m2[3] = {n[2], n[1], n[0]};
  const auto f1 = oracle_type_c(o1, m1), f2 = oracle_type_c(o2, m2);
  const auto expected = std::lexicographical_compare(f1.begin(), f1.begin() + 12, f2.begin(),
                                                     f2.begin() + 12)
                            ? f1
                            : f2;
  for (int i = 0; i < 18; ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  CHECK(got[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(got[4] == doctest::Approx(1.0));
  CHECK(got[8] == doctest::Approx(1.0));
  CHECK(got[12] == doctest::Approx(std::sqrt(5.0) / 3));
  CHECK(got[13] == doctest::Approx(std::sqrt(5.0) / 3));
  CHECK(got[14] == doctest::Approx(std::sqrt(2.0) / 3));
  CHECK(got[15] == doctest::Approx(pi / 4));
  CHECK(got[16] == doctest::Approx(pi / 4));
  CHECK(got[17] == doctest::Approx(pi / 2));
}

TEST_CASE("interior angles sum to pi") {
  Rng rng = make_rng(11, Stream::kPoints, 0);
  for (int t = 0; t < 200; ++t) {
    const PointCloud c = random_cloud(3, rng);
    const auto f = type_c(c.point(0), c.normal(0), c.point(1), c.normal(1), c.point(2), c.normal(2));
    CHECK(f[15] + f[16] + f[17] == doctest::Approx(pi).epsilon(1e-12));
    for (int i = 0; i < 18; ++i) {
      if (column_roles(DescriptorKind::kTypeC)[i] != ColumnRole::kLength) {
        CHECK(f[i] >= 0.0);
        CHECK(f[i] <= pi);
      }
    }
  }
}

TEST_CASE("raw triangle sorts side lengths") {
  const auto r = raw_triangle(Vec3(3, 4, 0), Vec3(0, 0, 0), Vec3(3, 0, 0));
  CHECK(r == std::array<double, 3>{3, 4, 5});
  const auto e = raw_triangle(Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(1, std::sqrt(3.0), 0));
  CHECK(e[0] == doctest::Approx(2));
  CHECK(e[2] == doctest::Approx(2));
  CHECK_THROWS_WITH(raw_triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)), "degenerate triangle");
}

TEST_CASE("canonical image is the same for all six input orders") {
  // Isosceles (two equal sides) with distinct normals.
  const Vec3 p[3] = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(1, 3, 0)};
  const Vec3 n[3] = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  int perm[3] = {0, 1, 2};
  std::vector<std::array<double, 18>> images;
  do {
    images.push_back(type_c(p[perm[0]], n[perm[0]], p[perm[1]], n[perm[1]], p[perm[2]], n[perm[2]]));
  } while (std::next_permutation(perm, perm + 3));
  REQUIRE(images.size() == 6);
  for (const auto& img : images) CHECK(img == images[0]);
  // Vertex 1 faces the shortest side.
  CHECK(images[0][4] <= images[0][8]);
  CHECK(images[0][8] <= images[0][0]);
}

TEST_CASE("scalene triangles get a unique vertex order") {
  Triple t = {{{Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(3, 0, 0), Vec3(0, 1, 0)},
               {Vec3(3, 4, 0), Vec3(0, 0, 1)}}};
  const Triple c = canonicalize(t);
  // Sides 3 (v0-v1), 4 (v1-v2), 5 (v0-v2): v2 faces 3, v0 faces 4, v1 faces 5.
  CHECK(c[0].position == Vec3(3, 4, 0));
  CHECK(c[1].position == Vec3(0, 0, 0));
  CHECK(c[2].position == Vec3(3, 0, 0));
}

TEST_CASE("combination counts") {
  CHECK(binomial(16, 2) == 120);
  CHECK(binomial(16, 3) == 560);
  CHECK(binomial(1024, 3) == 178433024);
  CHECK(binomial(2, 3) == 0);
}

TEST_CASE("N_d above the pool size repeats every combination evenly") {
  Rng rng = make_rng(3, Stream::kPoints, 0);
  const PointCloud cloud = random_cloud(16, rng);
  Rng sel = make_rng(3, Stream::kDescriptor, 0);
  const auto combos = select_combinations(cloud, {DescriptorKind::kTypeC, 4096, false, false}, sel);
  REQUIRE(combos.size() == 4096);
  std::map<std::array<int, 3>, int> counts;
  for (const auto& c : combos) ++counts[c];
  CHECK(counts.size() == 560);
  int sevens = 0, eights = 0;
  for (const auto& [c, n] : counts) {
    sevens += n == 7;
    eights += n == 8;
  }
  CHECK(sevens == 560 - 176);
  CHECK(eights == 176);
  CHECK(4096 == 7 * 560 + 176);
}

TEST_CASE("N_d at or below the pool size draws distinct combinations") {
  Rng rng = make_rng(4, Stream::kPoints, 0);
  const PointCloud cloud = random_cloud(16, rng);
  for (int nd : {1, 50, 120}) {
    Rng sel = make_rng(4, Stream::kDescriptor, static_cast<std::uint64_t>(nd));
    const auto combos = select_combinations(cloud, {DescriptorKind::kTypeA, nd, false, false}, sel);
    std::set<std::array<int, 3>> unique(combos.begin(), combos.end());
    CHECK(unique.size() == static_cast<std::size_t>(nd));
    for (const auto& c : combos) {
      CHECK(c[0] < c[1]);
      CHECK(c[2] == -1);
    }
  }
  // Large clouds take the rejection-sampling path.
  const PointCloud big = random_cloud(200, rng);
  Rng sel = make_rng(4, Stream::kDescriptor, 999);
  const auto combos = select_combinations(big, {DescriptorKind::kTypeB, 300, false, false}, sel);
  std::set<std::array<int, 3>> unique(combos.begin(), combos.end());
  CHECK(unique.size() == 300);
}

TEST_CASE("degenerate combinations are skipped") {
  PointCloud c(4);
  c.points << 0, 0, 0, 1, 0, 0, 2, 0, 0, 0, 1, 0;  // first three collinear
  c.normals.setZero();
  c.normals.col(2).setOnes();
  Rng rng = make_rng(0, Stream::kDescriptor, 0);
  const auto combos = select_combinations(c, {DescriptorKind::kTypeB, 9, false, false}, rng);
  REQUIRE(combos.size() == 9);
  for (const auto& k : combos) CHECK(k != std::array<int, 3>{0, 1, 2});

  PointCloud line(3);
  line.points << 0, 0, 0, 1, 0, 0, 2, 0, 0;
  line.normals = c.normals.topRows(3);
  CHECK_THROWS_AS(select_combinations(line, {DescriptorKind::kTypeC, 4, false, false}, rng), Error);
}

TEST_CASE("too few points") {
  Rng rng = make_rng(0, Stream::kPoints, 0);
  const PointCloud two = random_cloud(2, rng);
  CHECK_THROWS_WITH(build_descriptor_set(two, {DescriptorKind::kTypeB, 8, false, false}, rng),
                    "need ≥ 3 points");
  CHECK(build_descriptor_set(two, {DescriptorKind::kTypeA, 8, false, false}, rng).count() == 8);
  CHECK_THROWS_AS(build_descriptor_set(two, {DescriptorKind::kTypeA, 0, false, false}, rng), Error);
}

TEST_CASE("scale normalization divides lengths by the longest side") {
  PointCloud c(3);
  c.points << 0, 0, 0, 1, 0, 0, 3, 0, 0;
  c.normals << 0, 0, 1, 0, 1, 0, 1, 0, 0;
  Rng r1 = make_rng(0, Stream::kDescriptor, 0), r2 = r1;
  const DescriptorSet plain = build_descriptor_set(c, {DescriptorKind::kTypeA, 3, false, false}, r1);
  const DescriptorSet scaled = build_descriptor_set(c, {DescriptorKind::kTypeA, 3, true, false}, r2);
  CHECK(scaled.scale_normalized);
  std::vector<double> lengths;
  for (int r = 0; r < 3; ++r) {
    lengths.push_back(scaled.rows(r, 0));
    CHECK(scaled.rows(r, 0) == doctest::Approx(plain.rows(r, 0) / 3.0));
    for (int col = 1; col < 4; ++col) CHECK(scaled.rows(r, col) == plain.rows(r, col));
  }
  std::sort(lengths.begin(), lengths.end());
  CHECK(lengths[0] == doctest::Approx(1.0 / 3));
  CHECK(lengths[1] == doctest::Approx(2.0 / 3));
  CHECK(lengths[2] == 1.0);
}

TEST_CASE("type C scale normalization reaches exactly one and scales centroid distances") {
  Rng rng = make_rng(5, Stream::kPoints, 0);
  const PointCloud cloud = random_cloud(10, rng);
  Rng r1 = make_rng(5, Stream::kDescriptor, 0), r2 = r1;
  const auto plain = build_descriptor_set(cloud, {DescriptorKind::kTypeC, 64, false, false}, r1);
  const auto scaled = build_descriptor_set(cloud, {DescriptorKind::kTypeC, 64, true, false}, r2);
  const double d_max = plain.rows.leftCols(12).maxCoeff();
  double max_len = 0.0;
  for (int col : {0, 4, 8, 12, 13, 14}) {
    max_len = std::max(max_len, scaled.rows.col(col).maxCoeff());
    for (int r = 0; r < 64; ++r) {
      CHECK(scaled.rows(r, col) == doctest::Approx(plain.rows(r, col) / d_max).epsilon(1e-14));
    }
  }
  CHECK(max_len == 1.0);
}

TEST_CASE("folding maps normal angles into [0, pi/2]") {
  Rng rng = make_rng(6, Stream::kPoints, 0);
  PointCloud cloud = random_cloud(12, rng);
  Rng r1 = make_rng(6, Stream::kDescriptor, 0), r2 = r1, r3 = r1;
  const auto folded = build_descriptor_set(cloud, {DescriptorKind::kTypeB, 100, false, true}, r1);
  const auto& roles = column_roles(DescriptorKind::kTypeB);
  for (int col = 0; col < 12; ++col) {
    if (roles[col] != ColumnRole::kNormalAngle) continue;
    CHECK(folded.rows.col(col).maxCoeff() <= pi / 2);
  }
  // Flipping every normal leaves folded features unchanged.
  PointCloud flipped = cloud;
  flipped.normals *= -1.0;
  const auto folded_flip = build_descriptor_set(flipped, {DescriptorKind::kTypeB, 100, false, true}, r2);
  CHECK((folded.rows - folded_flip.rows).cwiseAbs().maxCoeff() < 1e-12);
  const auto unfolded = build_descriptor_set(cloud, {DescriptorKind::kTypeB, 100, false, false}, r3);
  CHECK(unfolded.rows.maxCoeff() > pi / 2);
}

TEST_CASE("rigid motion leaves descriptor sets unchanged") {
  Rng rng = make_rng(7, Stream::kPoints, 0);
  for (int t = 0; t < 20; ++t) {
    const PointCloud cloud = random_cloud(16, rng);
    Mat3 r;
    {
      // Rotation from a normalized random quaternion, built here rather than
      // through the library sampler.
      std::normal_distribution<double> g;
      Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
      r = q.normalized().toRotationMatrix();
    }
    PointCloud moved = cloud;
    moved.points = (cloud.points * r.transpose()).rowwise() + Eigen::RowVector3d(1, -2, 3);
    moved.normals = cloud.normals * r.transpose();
    for (auto kind : {DescriptorKind::kTypeA, DescriptorKind::kTypeB, DescriptorKind::kTypeC,
                      DescriptorKind::kRawTriangle}) {
      Rng a = make_rng(7, Stream::kDescriptor, static_cast<std::uint64_t>(t)), b = a;
      const auto x = build_descriptor_set(cloud, {kind, 256, false, false}, a);
      const auto y = build_descriptor_set(moved, {kind, 256, false, false}, b);
      CHECK((x.rows - y.rows).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("reordering cloud points permutes the descriptor multiset") {
  Rng rng = make_rng(8, Stream::kPoints, 0);
  const PointCloud cloud = random_cloud(10, rng);
  PointCloud shuffled = cloud;
  std::vector<int> order = {3, 7, 1, 9, 0, 5, 2, 8, 6, 4};
  for (int i = 0; i < 10; ++i) {
    shuffled.points.row(i) = cloud.points.row(order[static_cast<std::size_t>(i)]);
    shuffled.normals.row(i) = cloud.normals.row(order[static_cast<std::size_t>(i)]);
  }
  // N_d = C(10,3) covers every combination once.
  Rng a = make_rng(1, Stream::kDescriptor, 0), b = make_rng(2, Stream::kDescriptor, 0);
  const auto x = build_descriptor_set(cloud, {DescriptorKind::kTypeC, 120, false, false}, a);
  const auto y = build_descriptor_set(shuffled, {DescriptorKind::kTypeC, 120, false, false}, b);
  auto sorted_rows = [](const Features& f) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < f.rows(); ++r) rows.emplace_back(f.row(r).begin(), f.row(r).end());
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  const auto rx = sorted_rows(x.rows), ry = sorted_rows(y.rows);
  double worst = 0.0;
  for (std::size_t r = 0; r < rx.size(); ++r) {
    for (std::size_t c = 0; c < rx[r].size(); ++c) worst = std::max(worst, std::abs(rx[r][c] - ry[r][c]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("SPD1 round trip") {
  Rng rng = make_rng(9, Stream::kPoints, 0);
  const PointCloud cloud = random_cloud(8, rng);
  const auto set = build_descriptor_set(cloud, {DescriptorKind::kTypeC, 20, true, true}, rng);
  std::stringstream s;
  write_descriptor_set(s, set);
  const std::string bytes = s.str();
  CHECK(bytes.size() == 4 + 16 + 20 * 18 * 4);
  const DescriptorSet back = read_descriptor_set(s);
  CHECK(back.kind == DescriptorKind::kTypeC);
  CHECK(back.scale_normalized);
  CHECK(back.folded_normals);
  CHECK(back.count() == 20);
  CHECK((back.rows - set.rows).cwiseAbs().maxCoeff() < 1e-6);
  std::stringstream again;
  write_descriptor_set(again, back);
  CHECK(again.str() == bytes);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_descriptor_set(truncated), FormatError);
}
