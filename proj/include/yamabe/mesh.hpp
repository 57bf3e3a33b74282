#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace yamabe {

using Point = Eigen::Vector3d;
using Cell = std::array<int, 4>;
using Face = std::array<int, 3>;

// Faces tagged `Boundary` form the manifold boundary dM. `FarField` faces
// only appear on truncated half-space boxes and carry Dirichlet data.
enum class FaceTag { Boundary, FarField };

// Background metric g0: either the Euclidean metric of the embedding or
// factor^{4/(n-2)} times it, with one factor value per vertex.
struct BackgroundMetric {
  std::optional<Eigen::VectorXd> conformal_factor;

  bool is_euclidean() const { return !conformal_factor.has_value(); }
};

// Values at every mesh vertex.
struct ScalarField {
  Eigen::VectorXd values;
};

// Values at every boundary vertex, ordered as SimplicialMesh::boundary_vertices().
struct BoundaryField {
  Eigen::VectorXd values;
};

// Tetrahedral mesh of a compact 3-manifold with boundary. Immutable once
// built; `create` validates and precomputes the geometric quadrature data.
class SimplicialMesh {
 public:
  static SimplicialMesh create(int dimension, std::vector<Point> vertices, std::vector<Cell> cells,
                               std::vector<Face> boundary_faces, std::vector<FaceTag> face_tags,
                               BackgroundMetric metric = {});

  int dimension() const { return dimension_; }
  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Face>& boundary_faces() const { return boundary_faces_; }
  const std::vector<FaceTag>& face_tags() const { return face_tags_; }
  const BackgroundMetric& metric() const { return metric_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }

  // Vertices of dM (faces tagged Boundary), sorted by vertex index.
  const std::vector<int>& boundary_vertices() const { return boundary_vertices_; }
  // Vertex index -> position in boundary_vertices(), or -1.
  int boundary_slot(int vertex) const { return boundary_slot_[vertex]; }
  bool is_boundary_vertex(int vertex) const { return boundary_slot_[vertex] >= 0; }
  // Vertices lying on any far-field face.
  const std::vector<int>& farfield_vertices() const { return farfield_vertices_; }
  bool is_farfield_vertex(int vertex) const { return farfield_flag_[vertex] != 0; }
  bool has_farfield() const { return !farfield_vertices_.empty(); }

  // Indices into boundary_faces() of the faces tagged Boundary.
  const std::vector<int>& dm_faces() const { return dm_faces_; }

  double cell_volume(std::size_t c) const { return cell_volume_[c]; }
  double face_area(std::size_t f) const { return face_area_[f]; }
  // Outward unit normal of a boundary face.
  Point face_normal(std::size_t f) const;

  // Lumped Euclidean area weight of each boundary vertex (a third of the
  // adjacent dM face areas).
  const Eigen::VectorXd& boundary_lumped_area() const { return boundary_lumped_area_; }
  // Lumped Euclidean volume weight of every vertex.
  const Eigen::VectorXd& lumped_volume() const { return lumped_volume_; }

  double total_volume() const;
  double boundary_area() const;
  // Longest edge.
  double mesh_size() const { return mesh_size_; }
  double diameter() const { return diameter_; }

  // Unique undirected edges (i < j).
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  // Undirected edges of the dM surface.
  const std::vector<std::array<int, 2>>& boundary_edges() const { return boundary_edges_; }

  // Angle-weighted outward vertex normal of dM at a boundary slot.
  Point boundary_normal(int slot) const { return boundary_normals_[slot]; }

  // Euler characteristic V - E + F of the dM surface complex.
  int boundary_euler_characteristic() const;

  friend bool operator==(const SimplicialMesh& a, const SimplicialMesh& b);

 private:
  SimplicialMesh() = default;
  void validate() const;
  void build_derived();

  int dimension_ = 3;
  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<Face> boundary_faces_;
  std::vector<FaceTag> face_tags_;
  BackgroundMetric metric_;

  std::vector<int> boundary_vertices_;
  std::vector<int> boundary_slot_;
  std::vector<int> farfield_vertices_;
  std::vector<char> farfield_flag_;
  std::vector<int> dm_faces_;
  std::vector<double> cell_volume_;
  std::vector<double> face_area_;
  Eigen::VectorXd boundary_lumped_area_;
  Eigen::VectorXd lumped_volume_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 2>> boundary_edges_;
  std::vector<Point> boundary_normals_;
  double mesh_size_ = 0.0;
  double diameter_ = 0.0;
};

double signed_volume(const Point& a, const Point& b, const Point& c, const Point& d);

// Closed unit 3-ball. Level 0 already carries 512 cells; each further level
// splits every cell into eight (red refinement) with boundary vertices kept
// on the unit sphere.
SimplicialMesh build_ball_mesh(int n, int level);

// [-L,L]^2 x [0,L] with `resolution` cells per length L (cubic bricks, six
// tetrahedra each). The floor y3 = 0 is dM; the other five faces are far field.
SimplicialMesh build_halfspace_box_mesh(int n, double extent, int resolution);

// Same layout on an arbitrary tensor grid: the axis node arrays must be
// strictly increasing, the third must start at 0.
SimplicialMesh build_tensor_box_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
                                     const std::vector<double>& zs);

// Nodes on [lo, hi] clustered around `centers`: spacing grows like
// ratio * (distance + core) and is capped at max_spacing.
std::vector<double> graded_axis(double lo, double hi, const std::vector<double>& centers,
                                double core, double ratio, double max_spacing);

// Copy of `mesh` with every vertex moved by `map`; connectivity unchanged.
SimplicialMesh map_vertices(const SimplicialMesh& mesh,
                            const std::function<Point(const Point&)>& map);

// Copy of `mesh` carrying a conformal background metric factor^{4/(n-2)} g_eucl.
SimplicialMesh with_conformal_factor(const SimplicialMesh& mesh, Eigen::VectorXd factor);

void save_mesh(const SimplicialMesh& mesh, const std::filesystem::path& path);
SimplicialMesh load_mesh(const std::filesystem::path& path);
std::string mesh_to_json(const SimplicialMesh& mesh);
SimplicialMesh mesh_from_json(const std::string& text);

// sum over dM faces of area * mean over the face vertices of density * |f|^p.
double boundary_quadrature(const SimplicialMesh& mesh, const BoundaryField& f, double p);
double boundary_quadrature(const SimplicialMesh& mesh, const BoundaryField& f, double p,
                           const BoundaryField& density);

// Restriction of a vertex field to dM.
BoundaryField restrict_to_boundary(const SimplicialMesh& mesh, const ScalarField& u);
ScalarField sample(const SimplicialMesh& mesh, const std::function<double(const Point&)>& f);
BoundaryField sample_boundary(const SimplicialMesh& mesh,
                              const std::function<double(const Point&)>& f);

}  // namespace yamabe
