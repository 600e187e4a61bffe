#pragma once

// Surface samplers, OBJ meshes, vertex normals and area-weighted densification.

#include "mrf/common.hpp"
#include "mrf/graph.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace mrf {

struct SurfaceSpec {
  enum class Kind { sphere, ellipsoid, mobius, torus, hypercube_grid };
  Kind kind = Kind::sphere;
  double a = 1.0, b = 1.3, c = 0.7;  // ellipsoid semi-axes
  double width = 0.4;                // Moebius half-width w, v in [-w, w]
  double major = 2.0, minor = 0.7;   // torus R, r
  std::size_t grid_side = 5, grid_dim = 2;

  static SurfaceSpec sphere() { return {}; }
  static SurfaceSpec ellipsoid(double a, double b, double c) {
    SurfaceSpec s;
    s.kind = Kind::ellipsoid;
    s.a = a, s.b = b, s.c = c;
    return s;
  }
  static SurfaceSpec mobius(double width = 0.4) {
    SurfaceSpec s;
    s.kind = Kind::mobius;
    s.width = width;
    return s;
  }
  static SurfaceSpec torus(double major = 2.0, double minor = 0.7) {
    SurfaceSpec s;
    s.kind = Kind::torus;
    s.major = major, s.minor = minor;
    return s;
  }
  static SurfaceSpec hypercube_grid(std::size_t side, std::size_t dim) {
    SurfaceSpec s;
    s.kind = Kind::hypercube_grid;
    s.grid_side = side, s.grid_dim = dim;
    return s;
  }

  void validate() const {
    switch (kind) {
      case Kind::ellipsoid:
        require(a > 0 && b > 0 && c > 0, ErrorCode::invalid_argument, "ellipsoid axes must be positive");
        break;
      case Kind::mobius: require(width > 0, ErrorCode::invalid_argument, "strip width must be positive"); break;
      case Kind::torus:
        require(major > 0 && minor > 0, ErrorCode::invalid_argument, "torus radii must be positive");
        break;
      case Kind::hypercube_grid:
        require(grid_side >= 1 && grid_dim >= 1, ErrorCode::invalid_argument, "grid needs side >= 1 and dim >= 1");
        break;
      case Kind::sphere: break;
    }
  }
};

inline SurfaceSpec::Kind parse_surface_kind(const std::string& name) {
  if (name == "sphere") return SurfaceSpec::Kind::sphere;
  if (name == "ellipsoid") return SurfaceSpec::Kind::ellipsoid;
  if (name == "mobius") return SurfaceSpec::Kind::mobius;
  if (name == "torus") return SurfaceSpec::Kind::torus;
  if (name == "hypercube-grid") return SurfaceSpec::Kind::hypercube_grid;
  throw Error(ErrorCode::invalid_argument, "unknown surface '" + name + "'");
}

inline const char* surface_name(SurfaceSpec::Kind kind) {
  switch (kind) {
    case SurfaceSpec::Kind::sphere: return "sphere";
    case SurfaceSpec::Kind::ellipsoid: return "ellipsoid";
    case SurfaceSpec::Kind::mobius: return "mobius";
    case SurfaceSpec::Kind::torus: return "torus";
    case SurfaceSpec::Kind::hypercube_grid: return "hypercube-grid";
  }
  return "unknown";
}

// Golden-angle spiral on the unit sphere.
inline DenseMatrix fibonacci_sphere(std::size_t n) {
  DenseMatrix out(static_cast<Eigen::Index>(n), 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / nd;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    const auto row = static_cast<Eigen::Index>(i);
    out(row, 0) = r * std::cos(phi);
    out(row, 1) = r * std::sin(phi);
    out(row, 2) = z;
  }
  return out;
}

namespace detail {

// Factor pair (rows, cols) with rows*cols == n, both >= min_side, whose ratio
// is closest to `ratio`; falls back to the smallest covering grid.
inline std::pair<std::size_t, std::size_t> grid_shape(std::size_t n, double ratio, std::size_t min_side) {
  std::pair<std::size_t, std::size_t> best{0, 0};
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t cols = min_side; cols * min_side <= n; ++cols) {
    if (n % cols != 0) continue;
    const std::size_t rows = n / cols;
    const double score = std::abs(std::log(static_cast<double>(rows) / static_cast<double>(cols) / ratio));
    if (score < best_score) best_score = score, best = {rows, cols};
  }
  if (best.first != 0 && best_score < std::log(2.0)) return best;
  auto cols = std::max<std::size_t>(min_side, static_cast<std::size_t>(std::lround(std::sqrt(n / ratio))));
  auto rows = std::max<std::size_t>(min_side, (n + cols - 1) / cols);
  return {rows, cols};
}

inline DenseMatrix dedupe_rows(const DenseMatrix& points, std::size_t limit) {
  struct Key {
    std::array<long long, 3> v;
    bool operator==(const Key&) const = default;
  };
  struct Hash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = 0;
      for (auto x : k.v) h = h * 1000003u ^ std::hash<long long>{}(x);
      return h;
    }
  };
  std::unordered_set<Key, Hash> seen;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < points.rows() && keep.size() < limit; ++i) {
    Key key{};
    for (Eigen::Index c = 0; c < 3; ++c) key.v[static_cast<std::size_t>(c)] = std::llround(points(i, c) * 1e9);
    if (seen.insert(key).second) keep.push_back(i);
  }
  DenseMatrix out(static_cast<Eigen::Index>(keep.size()), 3);
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = points.row(keep[r]);
  return out;
}

}  // namespace detail

inline Eigen::Vector3d mobius_point(double u, double v) {
  const double radial = 1.0 + 0.5 * v * std::cos(0.5 * u);
  return {radial * std::cos(u), radial * std::sin(u), 0.5 * v * std::sin(0.5 * u)};
}

inline Eigen::Vector3d torus_point(double u, double v, double major, double minor) {
  const double radial = major + minor * std::cos(v);
  return {radial * std::cos(u), radial * std::sin(u), minor * std::sin(v)};
}

// N points on the requested surface. Hypercube grids ignore N and emit side^dim points in [0,1)^dim.
inline PointCloud sample_surface(const SurfaceSpec& spec, std::size_t n) {
  spec.validate();
  using Kind = SurfaceSpec::Kind;
  if (spec.kind == Kind::hypercube_grid) {
    GridGraph grid(spec.grid_side, spec.grid_dim);
    DenseMatrix out(static_cast<Eigen::Index>(grid.num_nodes()), static_cast<Eigen::Index>(spec.grid_dim));
    for (std::size_t v = 0; v < grid.num_nodes(); ++v) {
      const auto pos = grid.position(v);
      for (std::size_t c = 0; c < pos.size(); ++c) out(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(c)) = pos[c];
    }
    return PointCloud(std::move(out));
  }
  require(n >= 4, ErrorCode::invalid_argument, "need at least 4 sample points");
  if (spec.kind == Kind::sphere || spec.kind == Kind::ellipsoid) {
    DenseMatrix pts = fibonacci_sphere(n);
    if (spec.kind == Kind::ellipsoid) {
      pts.col(0) *= spec.a;
      pts.col(1) *= spec.b;
      pts.col(2) *= spec.c;
    }
    return PointCloud(std::move(pts));
  }
  const double two_pi = 2.0 * std::numbers::pi;
  if (spec.kind == Kind::torus) {
    const auto [nu, nv] = detail::grid_shape(n, spec.major / spec.minor, 3);
    DenseMatrix pts(static_cast<Eigen::Index>(nu * nv), 3);
    for (std::size_t i = 0; i < nu; ++i)
      for (std::size_t j = 0; j < nv; ++j)
        pts.row(static_cast<Eigen::Index>(i * nv + j)) =
            torus_point(two_pi * static_cast<double>(i) / static_cast<double>(nu),
                        two_pi * static_cast<double>(j) / static_cast<double>(nv), spec.major, spec.minor)
                .transpose();
    auto unique = detail::dedupe_rows(pts, n);
    require(unique.rows() >= 4, ErrorCode::resolution, "torus grid has fewer than 4 unique points");
    return PointCloud(std::move(unique));
  }
  // Moebius: u along the strip (length ~2 pi), v across it (length 2w).
  const auto [nu, nv] = detail::grid_shape(n, std::numbers::pi / spec.width, 2);
  DenseMatrix pts(static_cast<Eigen::Index>(nu * nv), 3);
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t j = 0; j < nv; ++j) {
      const double u = two_pi * static_cast<double>(i) / static_cast<double>(nu);
      const double v = -spec.width + 2.0 * spec.width * static_cast<double>(j) / static_cast<double>(nv - 1);
      pts.row(static_cast<Eigen::Index>(i * nv + j)) = mobius_point(u, v).transpose();
    }
  auto unique = detail::dedupe_rows(pts, n);
  require(unique.rows() >= 4, ErrorCode::resolution, "strip grid has fewer than 4 unique points");
  return PointCloud(std::move(unique));
}

// Implicit-equation residual of a point on the surface (0 on the surface).
inline double surface_residual(const SurfaceSpec& spec, std::span<const double> p) {
  using Kind = SurfaceSpec::Kind;
  switch (spec.kind) {
    case Kind::sphere: return std::abs(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - 1.0);
    case Kind::ellipsoid: {
      const double x = p[0] / spec.a, y = p[1] / spec.b, z = p[2] / spec.c;
      return std::abs(x * x + y * y + z * z - 1.0);
    }
    case Kind::torus: {
      const double q = std::hypot(p[0], p[1]) - spec.major;
      return std::abs(std::sqrt(q * q + p[2] * p[2]) - spec.minor);
    }
    case Kind::mobius: {
      // Recover (u, v) and measure the reconstruction gap.
      const double u = std::atan2(p[1], p[0]);
      double best = std::numeric_limits<double>::infinity();
      for (double uu : {u, u + 2.0 * std::numbers::pi}) {
        const double s = std::sin(0.5 * uu), c = std::cos(0.5 * uu);
        const double radial = std::hypot(p[0], p[1]);
        // radial = 1 + (v/2) c, z = (v/2) s
        const double v = 2.0 * ((radial - 1.0) * c + p[2] * s);
        const Eigen::Vector3d q = mobius_point(uu, v);
        best = std::min(best, std::sqrt((q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]) +
                                        (q[2] - p[2]) * (q[2] - p[2])));
      }
      return best;
    }
    case Kind::hypercube_grid: {
      double worst = 0.0;
      for (double x : p) worst = std::max(worst, std::max(0.0, -x) + std::max(0.0, x - 1.0));
      return worst;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Meshes

using Face = std::array<NodeId, 3>;

struct Mesh {
  PointCloud vertices;
  std::vector<Face> faces;
  DenseMatrix normals;     // optional, |V| x 3 or empty
  DenseMatrix velocities;  // optional, |V| x 3 or empty

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
};

inline double face_area(const PointCloud& v, const Face& f) {
  const Eigen::Vector3d a = v.point(f[0]).transpose(), b = v.point(f[1]).transpose(), c = v.point(f[2]).transpose();
  return 0.5 * (b - a).cross(c - a).norm();
}

inline constexpr double kDegenerateArea = 1e-12;

struct MeshLoadOptions {
  bool fan_triangulate = true;  // otherwise polygons with more than 3 corners are rejected
};

struct MeshLoadStats {
  std::size_t vertices = 0;
  std::size_t faces = 0;
  std::size_t degenerate_dropped = 0;
  std::size_t fan_split = 0;
};

// OBJ subset: `v x y z` and `f a b c ...` (1-based or negative indices, `a/b/c` tokens allowed).
inline Mesh parse_obj(std::istream& in, MeshLoadOptions options = {}, MeshLoadStats* stats = nullptr) {
  std::vector<double> coords;
  std::vector<std::vector<long long>> polygons;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      require(static_cast<bool>(ls >> x >> y >> z), ErrorCode::parse, "bad vertex on line " + std::to_string(line_no));
      require(std::isfinite(x) && std::isfinite(y) && std::isfinite(z), ErrorCode::parse,
              "non-finite vertex on line " + std::to_string(line_no));
      coords.insert(coords.end(), {x, y, z});
    } else if (tag == "f") {
      std::vector<long long> poly;
      std::string token;
      while (ls >> token) {
        const auto slash = token.find('/');
        const std::string head = token.substr(0, slash);
        try {
          std::size_t used = 0;
          const long long idx = std::stoll(head, &used);
          require(used == head.size() && idx != 0, ErrorCode::parse, "bad face index");
          const long long nv = static_cast<long long>(coords.size() / 3);
          const long long zero_based = idx > 0 ? idx - 1 : nv + idx;
          require(zero_based >= 0 && zero_based < nv, ErrorCode::parse,
                  "face index out of range on line " + std::to_string(line_no));
          poly.push_back(zero_based);
        } catch (const std::logic_error&) {
          throw Error(ErrorCode::parse, "bad face token '" + token + "' on line " + std::to_string(line_no));
        }
      }
      require(poly.size() >= 3, ErrorCode::parse, "face with fewer than 3 corners on line " + std::to_string(line_no));
      require(poly.size() == 3 || options.fan_triangulate, ErrorCode::parse,
              "non-triangular face on line " + std::to_string(line_no));
      polygons.push_back(std::move(poly));
    }
  }
  require(!coords.empty(), ErrorCode::parse, "mesh has no vertices");
  DenseMatrix v(static_cast<Eigen::Index>(coords.size() / 3), 3);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < 3; ++c) v(i, c) = coords[static_cast<std::size_t>(i * 3 + c)];
  Mesh mesh{PointCloud(std::move(v)), {}, {}, {}};
  MeshLoadStats st;
  for (const auto& poly : polygons) {
    if (poly.size() > 3) ++st.fan_split;
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      Face f{static_cast<NodeId>(poly[0]), static_cast<NodeId>(poly[k]), static_cast<NodeId>(poly[k + 1])};
      if (face_area(mesh.vertices, f) < kDegenerateArea) {
        ++st.degenerate_dropped;
        continue;
      }
      mesh.faces.push_back(f);
    }
  }
  st.vertices = mesh.num_vertices();
  st.faces = mesh.num_faces();
  if (stats) *stats = st;
  return mesh;
}

inline Mesh load_mesh(const std::string& path, MeshLoadOptions options = {}, MeshLoadStats* stats = nullptr) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open mesh '" + path + "'");
  return parse_obj(in, options, stats);
}

inline void write_obj(std::ostream& out, const Mesh& mesh) {
  out.precision(17);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const auto p = mesh.vertices.point(i);
    out << "v " << p(0) << ' ' << p(1) << ' ' << p(2) << '\n';
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

struct VertexNormals {
  DenseMatrix normals;              // unit rows; zero rows for flagged vertices
  std::vector<NodeId> zero_vertices;  // isolated or cancelling accumulations
};

// Sum of raw face cross products per vertex, then normalized.
inline VertexNormals vertex_normals(const Mesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  VertexNormals out{DenseMatrix::Zero(n, 3), {}};
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d a = mesh.vertices.point(f[0]).transpose();
    const Eigen::Vector3d b = mesh.vertices.point(f[1]).transpose();
    const Eigen::Vector3d c = mesh.vertices.point(f[2]).transpose();
    const Eigen::RowVector3d cross = (b - a).cross(c - a).transpose();
    for (auto v : f) out.normals.row(v) += cross;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double len = out.normals.row(i).norm();
    if (len > 0.0) {
      out.normals.row(i) /= len;
    } else {
      out.normals.row(i).setZero();
      out.zero_vertices.push_back(static_cast<NodeId>(i));
    }
  }
  return out;
}

// Unique undirected vertex pairs sharing a face edge.
inline std::vector<std::pair<NodeId, NodeId>> mesh_edges(const Mesh& mesh) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      NodeId a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 3)];
      if (a > b) std::swap(a, b);
      if (a != b) edges.emplace_back(a, b);
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

struct Provenance {
  NodeId face = 0;
  std::array<NodeId, 3> corners{};
  std::array<double, 3> beta{};
};

struct DensifiedCloud {
  PointCloud points;                   // first base_vertices rows are the mesh vertices
  std::size_t base_vertices = 0;
  std::vector<Provenance> provenance;  // one per added point
};

// Adds n_dense - |V| points: faces drawn with probability proportional to area,
// barycentric weights uniform on the simplex.
inline DensifiedCloud densify_mesh(const Mesh& mesh, std::size_t n_dense, std::uint64_t seed) {
  const std::size_t nv = mesh.num_vertices();
  require(n_dense >= nv, ErrorCode::invalid_argument, "n_dense must be at least the vertex count");
  const std::size_t extra = n_dense - nv;
  DenseMatrix pts(static_cast<Eigen::Index>(n_dense), 3);
  pts.topRows(static_cast<Eigen::Index>(nv)) = mesh.vertices.coords();
  DensifiedCloud out;
  out.base_vertices = nv;
  if (extra > 0) {
    require(!mesh.faces.empty(), ErrorCode::invalid_argument, "cannot densify a mesh without faces");
    std::vector<double> areas(mesh.faces.size());
    for (std::size_t i = 0; i < areas.size(); ++i) areas[i] = face_area(mesh.vertices, mesh.faces[i]);
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::mt19937_64 rng(seed);
    out.provenance.reserve(extra);
    for (std::size_t s = 0; s < extra; ++s) {
      const std::size_t fi = pick(rng);
      const double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
      Provenance p{static_cast<NodeId>(fi), mesh.faces[fi], {1.0 - r1, r1 * (1.0 - r2), r1 * r2}};
      const auto row = static_cast<Eigen::Index>(nv + s);
      pts.row(row).setZero();
      for (std::size_t k = 0; k < 3; ++k) pts.row(row) += p.beta[k] * mesh.vertices.point(p.corners[k]);
      out.provenance.push_back(p);
    }
  }
  out.points = PointCloud(std::move(pts));
  return out;
}

// Carries a per-vertex field onto the densified cloud with the stored barycentric weights.
inline DenseMatrix transfer_field(const DensifiedCloud& cloud, const DenseMatrix& field) {
  require(static_cast<std::size_t>(field.rows()) == cloud.base_vertices, ErrorCode::dimension_mismatch,
          "field must have one row per base vertex");
  DenseMatrix out(static_cast<Eigen::Index>(cloud.points.size()), field.cols());
  out.topRows(field.rows()) = field;
  for (std::size_t s = 0; s < cloud.provenance.size(); ++s) {
    const auto& p = cloud.provenance[s];
    const auto row = static_cast<Eigen::Index>(cloud.base_vertices + s);
    out.row(row) = p.beta[0] * field.row(p.corners[0]) + p.beta[1] * field.row(p.corners[1]) +
                   p.beta[2] * field.row(p.corners[2]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic meshes

// Closed torus grid mesh with nu x nv vertices.
inline Mesh torus_mesh(std::size_t nu, std::size_t nv, double major = 2.0, double minor = 0.7) {
  require(nu >= 3 && nv >= 3, ErrorCode::invalid_argument, "torus mesh needs at least 3x3 vertices");
  const double two_pi = 2.0 * std::numbers::pi;
  DenseMatrix v(static_cast<Eigen::Index>(nu * nv), 3);
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t j = 0; j < nv; ++j)
      v.row(static_cast<Eigen::Index>(i * nv + j)) =
          torus_point(two_pi * static_cast<double>(i) / static_cast<double>(nu),
                      two_pi * static_cast<double>(j) / static_cast<double>(nv), major, minor)
              .transpose();
  Mesh mesh{PointCloud(std::move(v)), {}, {}, {}};
  auto id = [&](std::size_t i, std::size_t j) { return static_cast<NodeId>((i % nu) * nv + (j % nv)); };
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t j = 0; j < nv; ++j) {
      mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return mesh;
}

// Torus mesh with roughly `target` vertices and cells close to square.
inline Mesh torus_mesh_with_vertices(std::size_t target, double major = 2.0, double minor = 0.7) {
  const auto [nu, nv] = detail::grid_shape(target, major / minor, 3);
  return torus_mesh(nu, nv, major, minor);
}

struct FlagParams {
  std::size_t nx = 40, ny = 25;
  double width = 2.0, height = 1.25;
  double amplitude = 0.15, wavenumber = 2.0 * std::numbers::pi, omega = 3.0, time = 0.0;
};

// Cloth grid pinned at x = 0 with a travelling wave; velocities are the exact time derivative.
inline Mesh flag_mesh(const FlagParams& p = {}) {
  require(p.nx >= 2 && p.ny >= 2, ErrorCode::invalid_argument, "flag mesh needs at least 2x2 vertices");
  DenseMatrix v(static_cast<Eigen::Index>(p.nx * p.ny), 3);
  DenseMatrix vel(v.rows(), 3);
  for (std::size_t i = 0; i < p.nx; ++i)
    for (std::size_t j = 0; j < p.ny; ++j) {
      const double x = p.width * static_cast<double>(i) / static_cast<double>(p.nx - 1);
      const double y = p.height * static_cast<double>(j) / static_cast<double>(p.ny - 1);
      const double envelope = p.amplitude * x / p.width;
      const double phase = p.wavenumber * x - p.omega * p.time + 0.5 * y;
      const auto row = static_cast<Eigen::Index>(i * p.ny + j);
      v.row(row) << x, y, envelope * std::sin(phase);
      vel.row(row) << 0.0, 0.0, -p.omega * envelope * std::cos(phase);
    }
  Mesh mesh{PointCloud(std::move(v)), {}, {}, std::move(vel)};
  auto id = [&](std::size_t i, std::size_t j) { return static_cast<NodeId>(i * p.ny + j); };
  for (std::size_t i = 0; i + 1 < p.nx; ++i)
    for (std::size_t j = 0; j + 1 < p.ny; ++j) {
      mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return mesh;
}

}  // namespace mrf
