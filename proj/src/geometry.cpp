#include "sparse3d/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "sparse3d/binary_io.hpp"
#include "sparse3d/error.hpp"

namespace sparse3d {

void TriangleMesh::validate() const {
  if (faces.empty()) throw Error("mesh has no faces");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (auto idx : face) {
      if (idx >= vertices.size()) {
        throw Error("face " + std::to_string(f) + " references vertex " +
                    std::to_string(idx) + " of " + std::to_string(vertices.size()));
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw Error("face " + std::to_string(f) + " repeats a vertex");
    }
  }
}

double TriangleMesh::face_area(std::size_t f) const {
  const auto& face = faces[f];
  const Vec3& a = vertices[face[0]];
  return 0.5 * (vertices[face[1]] - a).cross(vertices[face[2]] - a).norm();
}

double TriangleMesh::total_area() const {
  double area = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) area += face_area(f);
  return area;
}

RotationMode parse_rotation_mode(std::string_view name) {
  if (name == "none") return RotationMode::kNone;
  if (name == "z" || name == "aroundz") return RotationMode::kAroundZ;
  if (name == "so3") return RotationMode::kSO3;
  throw Error("unknown rotation mode '" + std::string(name) + "' (none|z|so3)");
}

std::string to_string(RotationMode mode) {
  switch (mode) {
    case RotationMode::kNone: return "none";
    case RotationMode::kAroundZ: return "z";
    case RotationMode::kSO3: return "so3";
  }
  return "?";
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), 1));
}

int VoxelGrid::cell_of(double coordinate) const {
  const double scaled = std::floor((coordinate + 0.5) * resolution);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= resolution) return resolution - 1;
  return static_cast<int>(scaled);
}

double voxel_iou(const VoxelGrid& predicted, const VoxelGrid& target) {
  if (predicted.resolution != target.resolution) {
    throw Error("voxel resolution mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < target.occupancy.size(); ++i) {
    const bool a = predicted.occupancy[i] != 0;
    const bool b = target.occupancy[i] != 0;
    inter += (a && b);
    uni += (a || b);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_voxels(std::ostream& out, const VoxelGrid& grid) {
  binary::write_magic(out, "SPV1");
  binary::write_u32(out, static_cast<std::uint32_t>(grid.resolution));
  out.write(reinterpret_cast<const char*>(grid.occupancy.data()),
            static_cast<std::streamsize>(grid.occupancy.size()));
  if (!out) throw Error("write failed");
}

VoxelGrid read_voxels(std::istream& in) {
  binary::expect_magic(in, "SPV1");
  const std::uint32_t r = binary::read_u32(in);
  if (r < 1 || r > 1024) throw FormatError("voxel resolution " + std::to_string(r) + " out of range");
  VoxelGrid grid(static_cast<int>(r));
  const std::string bytes = binary::read_bytes(in, grid.occupancy.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto b = static_cast<unsigned char>(bytes[i]);
    if (b > 1) throw FormatError("voxel byte " + std::to_string(i) + " is not 0 or 1");
    grid.occupancy[i] = b;
  }
  return grid;
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next line that is neither blank nor a comment. Returns false at EOF.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }
  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

TriangleMesh parse_off(std::istream& in) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError(reader.line_no(), "empty OFF stream");

  std::string_view header = line;
  header.remove_prefix(header.find_first_not_of(" \t"));
  if (header.substr(0, 3) != "OFF") {
    throw ParseError(reader.line_no(), "malformed header: expected 'OFF'");
  }
  std::string counts_line(header.substr(3));
  if (split_ws(counts_line).empty()) {
    if (!reader.next(counts_line)) {
      throw ParseError(reader.line_no(), "malformed header: missing counts line");
    }
  }
  const auto counts = split_ws(counts_line);
  std::size_t nv = 0, nf = 0, ne = 0;
  if (counts.size() < 2 || counts.size() > 3 || !parse_number(counts[0], nv) ||
      !parse_number(counts[1], nf) || (counts.size() == 3 && !parse_number(counts[2], ne))) {
    throw ParseError(reader.line_no(), "malformed header: expected 'nv nf [ne]'");
  }

  TriangleMesh mesh;
  mesh.vertices.reserve(nv);
  mesh.faces.reserve(nf);
  for (std::size_t v = 0; v < nv; ++v) {
    if (!reader.next(line)) {
      throw ParseError(reader.line_no(), "unexpected end of file in vertex list");
    }
    const auto tok = split_ws(line);
    Vec3 p;
    if (tok.size() < 3 || !parse_number(tok[0], p.x()) || !parse_number(tok[1], p.y()) ||
        !parse_number(tok[2], p.z())) {
      throw ParseError(reader.line_no(), "malformed vertex");
    }
    mesh.vertices.push_back(p);
  }
  for (std::size_t f = 0; f < nf; ++f) {
    if (!reader.next(line)) {
      throw ParseError(reader.line_no(), "unexpected end of file in face list");
    }
    const auto tok = split_ws(line);
    std::size_t n = 0;
    if (tok.empty() || !parse_number(tok[0], n)) {
      throw ParseError(reader.line_no(), "malformed face");
    }
    if (n != 3) throw ParseError(reader.line_no(), "non-triangular face");
    std::array<std::uint32_t, 3> face{};
    if (tok.size() < 4) throw ParseError(reader.line_no(), "malformed face");
    for (int c = 0; c < 3; ++c) {
      if (!parse_number(tok[1 + c], face[c])) {
        throw ParseError(reader.line_no(), "malformed face index");
      }
      if (face[c] >= nv) throw ParseError(reader.line_no(), "face index out of range");
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw ParseError(reader.line_no(), "degenerate face repeats a vertex");
    }
    mesh.faces.push_back(face);
  }
  if (mesh.faces.empty()) throw ParseError(reader.line_no(), "mesh has no faces");
  return mesh;
}

TriangleMesh parse_off(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_off(in);
}

TriangleMesh load_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_off(in);
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_off(std::ostream& out, const TriangleMesh& mesh) {
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  out.precision(17);
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

TriangleMesh normalize_mesh(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw Error("cannot normalize an empty mesh");
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(mesh.vertices.size());

  double radius = 0.0;
  for (const auto& v : mesh.vertices) radius = std::max(radius, (v - centroid).norm());
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error("degenerate mesh: all vertices coincide");
  }
  TriangleMesh out = mesh;
  const double scale = 0.5 / radius;
  for (auto& v : out.vertices) v = (v - centroid) * scale;
  return out;
}

PointCloud sample_surface(const TriangleMesh& mesh, int k, Rng& rng) {
  if (k < 1) throw Error("sample count must be >= 1");
  std::vector<double> areas(mesh.faces.size());
  for (std::size_t f = 0; f < areas.size(); ++f) areas[f] = mesh.face_area(f);
  double total = 0.0;
  for (double a : areas) total += a;
  if (!(total > 0.0)) throw Error("mesh has zero surface area");

  std::discrete_distribution<std::size_t> pick_face(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud(k);
  for (int i = 0; i < k; ++i) {
    const auto& face = mesh.faces[pick_face(rng)];
    const Vec3& a = mesh.vertices[face[0]];
    const Vec3 ab = mesh.vertices[face[1]] - a;
    const Vec3 ac = mesh.vertices[face[2]] - a;
    double r1 = unit(rng);
    double r2 = unit(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    cloud.points.row(i) = (a + r1 * ab + r2 * ac).transpose();
    cloud.normals.row(i) = ab.cross(ac).normalized().transpose();
  }
  return cloud;
}

Mat3 random_rotation(RotationMode mode, Rng& rng) {
  switch (mode) {
    case RotationMode::kNone:
      return Mat3::Identity();
    case RotationMode::kAroundZ: {
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      return Eigen::AngleAxisd(angle(rng), Vec3::UnitZ()).toRotationMatrix();
    }
    case RotationMode::kSO3: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      Eigen::Quaterniond q;
      do {
        const double w = gauss(rng), x = gauss(rng), y = gauss(rng), z = gauss(rng);
        q = Eigen::Quaterniond(w, x, y, z);
      } while (q.norm() < 1e-12);
      return q.normalized().toRotationMatrix();
    }
  }
  return Mat3::Identity();
}

PointCloud apply_rigid(const PointCloud& cloud, const Mat3& rotation, const Vec3& translation) {
  PointCloud out;
  out.points = cloud.points * rotation.transpose();
  out.points.rowwise() += translation.transpose();
  out.normals = cloud.normals * rotation.transpose();
  return out;
}

int dense_sample_count(int resolution) {
  const long long cells = static_cast<long long>(resolution) * resolution * resolution;
  return static_cast<int>(std::max<long long>(10000, 10 * cells));
}

VoxelGrid voxelize(const Points& points, int resolution) {
  if (resolution < 2) throw Error("voxel resolution must be >= 2");
  VoxelGrid grid(resolution);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    grid.occupancy[grid.index(grid.cell_of(points(i, 0)), grid.cell_of(points(i, 1)),
                              grid.cell_of(points(i, 2)))] = 1;
  }
  return grid;
}

VoxelGrid voxelize(const TriangleMesh& mesh, int resolution, Rng& rng) {
  if (resolution < 2) throw Error("voxel resolution must be >= 2");
  return voxelize(sample_surface(mesh, dense_sample_count(resolution), rng).points, resolution);
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kCube: return "cube";
    case ShapeKind::kCylinder: return "cylinder";
    case ShapeKind::kTorus: return "torus";
  }
  return "?";
}

namespace {

void sample_sphere(PointCloud& cloud, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    Vec3 d;
    do {
      d = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (d.norm() < 1e-12);
    d.normalize();
    cloud.points.row(i) = 0.5 * d.transpose();
    cloud.normals.row(i) = d.transpose();
  }
}

void sample_cube(PointCloud& cloud, Rng& rng) {
  const double h = 0.5 / std::sqrt(3.0);
  std::uniform_int_distribution<int> pick_face(0, 5);
  std::uniform_real_distribution<double> coord(-h, h);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const int face = pick_face(rng);
    const int axis = face / 2;
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    Vec3 p(coord(rng), coord(rng), coord(rng));
    p[axis] = sign * h;
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    cloud.points.row(i) = p.transpose();
    cloud.normals.row(i) = n.transpose();
  }
}

// Height equals diameter; the rim circle sits at radius 0.5.
void sample_cylinder(PointCloud& cloud, Rng& rng) {
  const double a = 0.5 / std::sqrt(2.0);
  const double side_area = 2.0 * std::numbers::pi * a * (2.0 * a);
  const double cap_area = std::numbers::pi * a * a;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double pick = unit(rng) * (side_area + 2.0 * cap_area);
    const double theta = angle(rng);
    const double c = std::cos(theta), s = std::sin(theta);
    if (pick < side_area) {
      const double z = (2.0 * unit(rng) - 1.0) * a;
      cloud.points.row(i) << a * c, a * s, z;
      cloud.normals.row(i) << c, s, 0.0;
    } else {
      const double sign = pick < side_area + cap_area ? 1.0 : -1.0;
      const double r = a * std::sqrt(unit(rng));
      cloud.points.row(i) << r * c, r * s, sign * a;
      cloud.normals.row(i) << 0.0, 0.0, sign;
    }
  }
}

void sample_torus(PointCloud& cloud, Rng& rng) {
  constexpr double big = kTorusMajorRadius;
  constexpr double small = kTorusMinorRadius;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    // Area element is proportional to (big + small cos v); rejection sample v.
    double v = 0.0;
    do {
      v = angle(rng);
    } while (unit(rng) * (big + small) > big + small * std::cos(v));
    const double u = angle(rng);
    const double ring = big + small * std::cos(v);
    cloud.points.row(i) << ring * std::cos(u), ring * std::sin(u), small * std::sin(v);
    cloud.normals.row(i) << std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v);
  }
}

}  // namespace

PointCloud synth_shape(ShapeKind kind, int k, Rng& rng) {
  if (k < 1) throw Error("sample count must be >= 1");
  PointCloud cloud(k);
  switch (kind) {
    case ShapeKind::kSphere: sample_sphere(cloud, rng); break;
    case ShapeKind::kCube: sample_cube(cloud, rng); break;
    case ShapeKind::kCylinder: sample_cylinder(cloud, rng); break;
    case ShapeKind::kTorus: sample_torus(cloud, rng); break;
  }
  return cloud;
}

Eigen::MatrixXd pairwise_distances(const Points& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (points.row(i) - points.row(j)).norm();
  }
  return d;
}

}  // namespace sparse3d
