#include "yamabe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "yamabe/error.hpp"

namespace yamabe {

namespace {

using FaceKey = std::array<int, 3>;

FaceKey sorted_face(int a, int b, int c) {
  FaceKey k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

// Faces of a tetrahedron paired with the index of the opposite vertex.
constexpr std::array<std::array<int, 4>, 4> kCellFaces = {{
    {1, 2, 3, 0},
    {0, 3, 2, 1},
    {0, 1, 3, 2},
    {0, 2, 1, 3},
}};

struct FaceUse {
  int count = 0;
  int cell = -1;
  int opposite = -1;
};

std::map<FaceKey, FaceUse> count_faces(const std::vector<Cell>& cells) {
  std::map<FaceKey, FaceUse> uses;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& t = cells[c];
    for (const auto& f : kCellFaces) {
      auto& use = uses[sorted_face(t[f[0]], t[f[1]], t[f[2]])];
      ++use.count;
      use.cell = static_cast<int>(c);
      use.opposite = t[f[3]];
    }
  }
  return uses;
}

// Faces used by exactly one cell, oriented so the normal points away from
// the cell.
std::vector<Face> exterior_faces(const std::vector<Point>& vertices,
                                 const std::vector<Cell>& cells) {
  std::vector<Face> faces;
  for (const auto& [key, use] : count_faces(cells)) {
    if (use.count != 1) continue;
    Face f{key[0], key[1], key[2]};
    const Point n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    if (n.dot(vertices[use.opposite] - vertices[f[0]]) > 0.0) std::swap(f[1], f[2]);
    faces.push_back(f);
  }
  return faces;
}

void orient_positive(const std::vector<Point>& v, Cell& c) {
  if (signed_volume(v[c[0]], v[c[1]], v[c[2]], v[c[3]]) < 0.0) std::swap(c[2], c[3]);
}

}  // namespace

double signed_volume(const Point& a, const Point& b, const Point& c, const Point& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

SimplicialMesh SimplicialMesh::create(int dimension, std::vector<Point> vertices,
                                      std::vector<Cell> cells, std::vector<Face> boundary_faces,
                                      std::vector<FaceTag> face_tags, BackgroundMetric metric) {
  if (dimension != 3) {
    throw Error(ErrorCode::UnsupportedDimension,
                "only n = 3 meshes are supported, got n = " + std::to_string(dimension));
  }
  SimplicialMesh m;
  m.dimension_ = dimension;
  m.vertices_ = std::move(vertices);
  m.cells_ = std::move(cells);
  m.boundary_faces_ = std::move(boundary_faces);
  m.face_tags_ = std::move(face_tags);
  m.metric_ = std::move(metric);
  m.validate();
  m.build_derived();
  return m;
}

void SimplicialMesh::validate() const {
  const int nv = static_cast<int>(vertices_.size());
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidMesh, msg); };

  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!vertices_[i].allFinite()) fail("vertex " + std::to_string(i) + " is not finite");
  }
  std::set<std::array<int, 4>> seen;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    auto key = cells_[c];
    for (int idx : key) {
      if (idx < 0 || idx >= nv) fail("cell " + std::to_string(c) + " has vertex index out of range");
    }
    std::sort(key.begin(), key.end());
    if (std::adjacent_find(key.begin(), key.end()) != key.end()) {
      fail("cell " + std::to_string(c) + " repeats a vertex");
    }
    if (!seen.insert(key).second) fail("duplicate cell " + std::to_string(c));
    const auto& t = cells_[c];
    if (!(signed_volume(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]) > 0.0)) {
      throw Error(ErrorCode::DegenerateCell, "cell " + std::to_string(c) + " has nonpositive signed volume");
    }
  }
  if (face_tags_.size() != boundary_faces_.size()) fail("face_tags size differs from boundary_faces");

  auto uses = count_faces(cells_);
  std::set<FaceKey> listed;
  for (std::size_t f = 0; f < boundary_faces_.size(); ++f) {
    const Face& face = boundary_faces_[f];
    for (int idx : face) {
      if (idx < 0 || idx >= nv) fail("boundary face " + std::to_string(f) + " index out of range");
    }
    const FaceKey key = sorted_face(face[0], face[1], face[2]);
    auto it = uses.find(key);
    if (it == uses.end() || it->second.count != 1) {
      fail("boundary face " + std::to_string(f) + " is not a face of exactly one cell");
    }
    if (!listed.insert(key).second) fail("boundary face " + std::to_string(f) + " listed twice");
    const Point n = (vertices_[face[1]] - vertices_[face[0]]).cross(vertices_[face[2]] - vertices_[face[0]]);
    if (n.dot(vertices_[it->second.opposite] - vertices_[face[0]]) >= 0.0) {
      fail("boundary face " + std::to_string(f) + " is not outward oriented");
    }
  }
  for (const auto& [key, use] : uses) {
    if (use.count > 2) fail("a face is shared by more than two cells");
    if (use.count == 1 && !listed.count(key)) fail("exterior face missing from boundary_faces");
  }
  // Closed surface: every boundary edge borders exactly two boundary faces.
  std::map<std::array<int, 2>, int> edge_count;
  for (const Face& face : boundary_faces_) {
    for (int k = 0; k < 3; ++k) {
      std::array<int, 2> e{face[k], face[(k + 1) % 3]};
      if (e[0] > e[1]) std::swap(e[0], e[1]);
      ++edge_count[e];
    }
  }
  for (const auto& [e, count] : edge_count) {
    if (count != 2) fail("boundary surface is not closed");
  }
  if (metric_.conformal_factor) {
    const auto& phi = *metric_.conformal_factor;
    if (phi.size() != nv) fail("conformal factor size differs from vertex count");
    if (!phi.allFinite() || phi.minCoeff() <= 0.0) fail("conformal factor must be finite and positive");
  }
}

void SimplicialMesh::build_derived() {
  const std::size_t nv = vertices_.size();
  cell_volume_.resize(cells_.size());
  lumped_volume_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& t = cells_[c];
    cell_volume_[c] = signed_volume(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]);
    for (int idx : t) lumped_volume_[idx] += cell_volume_[c] / 4.0;
  }

  boundary_slot_.assign(nv, -1);
  farfield_flag_.assign(nv, 0);
  face_area_.resize(boundary_faces_.size());
  dm_faces_.clear();
  for (std::size_t f = 0; f < boundary_faces_.size(); ++f) {
    const Face& face = boundary_faces_[f];
    face_area_[f] = 0.5 * (vertices_[face[1]] - vertices_[face[0]])
                              .cross(vertices_[face[2]] - vertices_[face[0]])
                              .norm();
    if (face_tags_[f] == FaceTag::Boundary) {
      dm_faces_.push_back(static_cast<int>(f));
      for (int idx : face) boundary_slot_[idx] = 0;
    } else {
      for (int idx : face) farfield_flag_[idx] = 1;
    }
  }
  boundary_vertices_.clear();
  farfield_vertices_.clear();
  for (std::size_t i = 0; i < nv; ++i) {
    if (boundary_slot_[i] == 0) {
      boundary_slot_[i] = static_cast<int>(boundary_vertices_.size());
      boundary_vertices_.push_back(static_cast<int>(i));
    }
    if (farfield_flag_[i]) farfield_vertices_.push_back(static_cast<int>(i));
  }

  const auto nb = static_cast<Eigen::Index>(boundary_vertices_.size());
  boundary_lumped_area_ = Eigen::VectorXd::Zero(nb);
  boundary_normals_.assign(boundary_vertices_.size(), Point::Zero());
  std::set<std::array<int, 2>> bedges;
  for (int f : dm_faces_) {
    const Face& face = boundary_faces_[f];
    const Point n = face_normal(f);
    for (int k = 0; k < 3; ++k) {
      const int slot = boundary_slot_[face[k]];
      boundary_lumped_area_[slot] += face_area_[f] / 3.0;
      const Point e1 = (vertices_[face[(k + 1) % 3]] - vertices_[face[k]]).normalized();
      const Point e2 = (vertices_[face[(k + 2) % 3]] - vertices_[face[k]]).normalized();
      const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
      boundary_normals_[slot] += angle * n;
      std::array<int, 2> e{face[k], face[(k + 1) % 3]};
      if (e[0] > e[1]) std::swap(e[0], e[1]);
      bedges.insert(e);
    }
  }
  for (auto& n : boundary_normals_) n.normalize();
  boundary_edges_.assign(bedges.begin(), bedges.end());

  std::set<std::array<int, 2>> all_edges;
  for (const auto& t : cells_) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        all_edges.insert({std::min(t[a], t[b]), std::max(t[a], t[b])});
      }
    }
  }
  edges_.assign(all_edges.begin(), all_edges.end());
  mesh_size_ = 0.0;
  for (const auto& e : edges_) {
    mesh_size_ = std::max(mesh_size_, (vertices_[e[0]] - vertices_[e[1]]).norm());
  }

  // The diameter is attained between two hull vertices, all of which lie
  // on the exterior faces.
  std::vector<int> hull;
  {
    std::set<int> s;
    for (const auto& face : boundary_faces_) s.insert(face.begin(), face.end());
    hull.assign(s.begin(), s.end());
  }
  diameter_ = 0.0;
  for (std::size_t a = 0; a < hull.size(); ++a) {
    for (std::size_t b = a + 1; b < hull.size(); ++b) {
      diameter_ = std::max(diameter_, (vertices_[hull[a]] - vertices_[hull[b]]).squaredNorm());
    }
  }
  diameter_ = std::sqrt(diameter_);
}

Point SimplicialMesh::face_normal(std::size_t f) const {
  const Face& face = boundary_faces_[f];
  return (vertices_[face[1]] - vertices_[face[0]])
      .cross(vertices_[face[2]] - vertices_[face[0]])
      .normalized();
}

double SimplicialMesh::total_volume() const {
  return std::accumulate(cell_volume_.begin(), cell_volume_.end(), 0.0);
}

double SimplicialMesh::boundary_area() const {
  double a = 0.0;
  for (int f : dm_faces_) a += face_area_[f];
  return a;
}

int SimplicialMesh::boundary_euler_characteristic() const {
  return static_cast<int>(boundary_vertices_.size()) - static_cast<int>(boundary_edges_.size()) +
         static_cast<int>(dm_faces_.size());
}

bool operator==(const SimplicialMesh& a, const SimplicialMesh& b) {
  if (a.dimension_ != b.dimension_ || a.cells_ != b.cells_ || a.boundary_faces_ != b.boundary_faces_ ||
      a.face_tags_ != b.face_tags_ || a.vertices_.size() != b.vertices_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.vertices_.size(); ++i) {
    if (a.vertices_[i] != b.vertices_[i]) return false;
  }
  if (a.metric_.is_euclidean() != b.metric_.is_euclidean()) return false;
  if (a.metric_.conformal_factor && *a.metric_.conformal_factor != *b.metric_.conformal_factor) {
    return false;
  }
  return true;
}

namespace {

// Red refinement: every tetrahedron is split into eight using edge midpoints.
void refine_red(std::vector<Point>& vertices, std::vector<Cell>& cells) {
  std::map<std::array<int, 2>, int> midpoint;
  auto mid = [&](int a, int b) {
    std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    auto [it, inserted] = midpoint.try_emplace(key, static_cast<int>(vertices.size()));
    if (inserted) vertices.push_back(0.5 * (vertices[a] + vertices[b]));
    return it->second;
  };
  std::vector<Cell> refined;
  refined.reserve(cells.size() * 8);
  for (const Cell& t : cells) {
    const int x0 = t[0], x1 = t[1], x2 = t[2], x3 = t[3];
    const int x01 = mid(x0, x1), x02 = mid(x0, x2), x03 = mid(x0, x3);
    const int x12 = mid(x1, x2), x13 = mid(x1, x3), x23 = mid(x2, x3);
    const std::array<Cell, 8> children = {{
        {x0, x01, x02, x03},
        {x01, x1, x12, x13},
        {x02, x12, x2, x23},
        {x03, x13, x23, x3},
        {x01, x02, x03, x13},
        {x01, x02, x12, x13},
        {x02, x03, x13, x23},
        {x02, x12, x13, x23},
    }};
    for (Cell c : children) refined.push_back(c);
  }
  cells = std::move(refined);
}

}  // namespace

SimplicialMesh build_ball_mesh(int n, int level) {
  if (n != 3) throw Error(ErrorCode::UnsupportedDimension, "ball meshes exist only for n = 3");
  if (level < 0) throw Error(ErrorCode::InvalidResolution, "refinement level must be >= 0");

  // Octahedron |x|_1 <= 1 split into its eight octant tetrahedra.
  std::vector<Point> vertices = {Point::Zero(),      Point(1, 0, 0), Point(-1, 0, 0), Point(0, 1, 0),
                                 Point(0, -1, 0),    Point(0, 0, 1), Point(0, 0, -1)};
  std::vector<Cell> cells;
  for (int sx : {1, 2}) {
    for (int sy : {3, 4}) {
      for (int sz : {5, 6}) cells.push_back({0, sx, sy, sz});
    }
  }
  for (int k = 0; k < level + 2; ++k) refine_red(vertices, cells);

  // Radial map of the octahedron onto the ball: x -> x |x|_1 / |x|_2.
  for (Point& p : vertices) {
    const double r2 = p.norm();
    if (r2 > 0.0) p *= p.lpNorm<1>() / r2;
  }
  for (Cell& c : cells) orient_positive(vertices, c);
  std::vector<Face> faces = exterior_faces(vertices, cells);
  std::vector<FaceTag> tags(faces.size(), FaceTag::Boundary);
  return SimplicialMesh::create(3, std::move(vertices), std::move(cells), std::move(faces),
                                std::move(tags));
}

SimplicialMesh build_tensor_box_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
                                     const std::vector<double>& zs) {
  auto check_axis = [](const std::vector<double>& a, const char* name) {
    if (a.size() < 2) throw Error(ErrorCode::InvalidResolution, std::string(name) + " axis needs two nodes");
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (!(a[i] > a[i - 1])) {
        throw Error(ErrorCode::InvalidResolution, std::string(name) + " axis is not increasing");
      }
    }
  };
  check_axis(xs, "x");
  check_axis(ys, "y");
  check_axis(zs, "z");
  if (zs.front() != 0.0) throw Error(ErrorCode::InvalidArgument, "z axis must start at the floor 0");

  const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size()),
            nz = static_cast<int>(zs.size());
  auto id = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) vertices.emplace_back(xs[i], ys[j], zs[k]);
    }
  }
  // Kuhn subdivision: six tetrahedra along the main diagonal of each brick,
  // conforming across bricks.
  static constexpr std::array<std::array<int, 3>, 6> kPerms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(nx - 1) * (ny - 1) * (nz - 1) * 6);
  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        for (const auto& perm : kPerms) {
          std::array<int, 3> at{i, j, k};
          Cell c{};
          c[0] = id(at[0], at[1], at[2]);
          for (int s = 0; s < 3; ++s) {
            ++at[perm[s]];
            c[s + 1] = id(at[0], at[1], at[2]);
          }
          orient_positive(vertices, c);
          cells.push_back(c);
        }
      }
    }
  }
  std::vector<Face> faces = exterior_faces(vertices, cells);
  std::vector<FaceTag> tags;
  tags.reserve(faces.size());
  for (const Face& f : faces) {
    const bool floor = vertices[f[0]].z() == 0.0 && vertices[f[1]].z() == 0.0 && vertices[f[2]].z() == 0.0;
    tags.push_back(floor ? FaceTag::Boundary : FaceTag::FarField);
  }
  return SimplicialMesh::create(3, std::move(vertices), std::move(cells), std::move(faces),
                                std::move(tags));
}

SimplicialMesh build_halfspace_box_mesh(int n, double extent, int resolution) {
  if (n != 3) throw Error(ErrorCode::UnsupportedDimension, "half-space boxes exist only for n = 3");
  if (!(extent > 0.0)) throw Error(ErrorCode::InvalidArgument, "extent must be positive");
  if (resolution < 2) throw Error(ErrorCode::InvalidResolution, "resolution must be >= 2");
  std::vector<double> xs(2 * resolution + 1), zs(resolution + 1);
  for (int i = 0; i <= 2 * resolution; ++i) xs[i] = extent * (static_cast<double>(i) / resolution - 1.0);
  for (int k = 0; k <= resolution; ++k) zs[k] = extent * static_cast<double>(k) / resolution;
  xs[resolution] = 0.0;
  return build_tensor_box_mesh(xs, xs, zs);
}

std::vector<double> graded_axis(double lo, double hi, const std::vector<double>& centers, double core,
                                double ratio, double max_spacing) {
  if (!(hi > lo) || !(core > 0.0) || !(ratio > 0.0) || !(max_spacing > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "graded_axis: invalid parameters");
  }
  std::vector<double> breaks{lo, hi};
  for (double c : centers) {
    if (c > lo && c < hi) breaks.push_back(c);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto spacing = [&](double x) {
    double d = centers.empty() ? hi - lo : std::abs(x - centers.front());
    for (double c : centers) d = std::min(d, std::abs(x - c));
    return std::min(max_spacing, ratio * (d + core));
  };
  std::vector<double> nodes{lo};
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    // Equidistribute the density 1/spacing on [a, b].
    constexpr int kSamples = 4000;
    std::vector<double> cumulative(kSamples + 1, 0.0);
    const double dx = (b - a) / kSamples;
    for (int i = 0; i < kSamples; ++i) {
      const double x = a + (i + 0.5) * dx;
      cumulative[i + 1] = cumulative[i] + dx / spacing(x);
    }
    const int cells = std::max(1, static_cast<int>(std::ceil(cumulative.back() - 1e-9)));
    for (int c = 1; c < cells; ++c) {
      const double target = cumulative.back() * c / cells;
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
      const auto i = static_cast<int>(it - cumulative.begin());
      const double t = (target - cumulative[i - 1]) / (cumulative[i] - cumulative[i - 1]);
      nodes.push_back(a + (i - 1 + t) * dx);
    }
    nodes.push_back(b);
  }
  return nodes;
}

SimplicialMesh map_vertices(const SimplicialMesh& mesh, const std::function<Point(const Point&)>& map) {
  std::vector<Point> vertices;
  vertices.reserve(mesh.num_vertices());
  for (const Point& p : mesh.vertices()) vertices.push_back(map(p));
  return SimplicialMesh::create(mesh.dimension(), std::move(vertices), mesh.cells(),
                                mesh.boundary_faces(), mesh.face_tags(), mesh.metric());
}

SimplicialMesh with_conformal_factor(const SimplicialMesh& mesh, Eigen::VectorXd factor) {
  return SimplicialMesh::create(mesh.dimension(), mesh.vertices(), mesh.cells(), mesh.boundary_faces(),
                                mesh.face_tags(), BackgroundMetric{std::move(factor)});
}

double boundary_quadrature(const SimplicialMesh& mesh, const BoundaryField& f, double p) {
  BoundaryField ones{Eigen::VectorXd::Ones(f.values.size())};
  return boundary_quadrature(mesh, f, p, ones);
}

double boundary_quadrature(const SimplicialMesh& mesh, const BoundaryField& f, double p,
                           const BoundaryField& density) {
  const auto nb = static_cast<Eigen::Index>(mesh.boundary_vertices().size());
  if (f.values.size() != nb || density.values.size() != nb) {
    throw Error(ErrorCode::InvalidArgument, "boundary field size differs from boundary vertex count");
  }
  if (!f.values.allFinite()) throw Error(ErrorCode::InvalidArgument, "boundary field is not finite");
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "quadrature exponent must be >= 1");
  double total = 0.0;
  for (int face : mesh.dm_faces()) {
    double avg = 0.0;
    for (int v : mesh.boundary_faces()[face]) {
      const int s = mesh.boundary_slot(v);
      const double a = std::abs(f.values[s]);
      avg += density.values[s] * (p == 1.0 ? a : std::pow(a, p));
    }
    total += mesh.face_area(face) * avg / 3.0;
  }
  return total;
}

BoundaryField restrict_to_boundary(const SimplicialMesh& mesh, const ScalarField& u) {
  const auto& bv = mesh.boundary_vertices();
  BoundaryField out{Eigen::VectorXd(static_cast<Eigen::Index>(bv.size()))};
  for (std::size_t s = 0; s < bv.size(); ++s) out.values[static_cast<Eigen::Index>(s)] = u.values[bv[s]];
  return out;
}

ScalarField sample(const SimplicialMesh& mesh, const std::function<double(const Point&)>& f) {
  ScalarField out{Eigen::VectorXd(static_cast<Eigen::Index>(mesh.num_vertices()))};
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    out.values[static_cast<Eigen::Index>(i)] = f(mesh.vertices()[i]);
  }
  return out;
}

BoundaryField sample_boundary(const SimplicialMesh& mesh, const std::function<double(const Point&)>& f) {
  const auto& bv = mesh.boundary_vertices();
  BoundaryField out{Eigen::VectorXd(static_cast<Eigen::Index>(bv.size()))};
  for (std::size_t s = 0; s < bv.size(); ++s) {
    out.values[static_cast<Eigen::Index>(s)] = f(mesh.vertices()[bv[s]]);
  }
  return out;
}

}  // namespace yamabe
