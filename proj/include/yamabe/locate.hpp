#pragma once

#include <memory>
#include <vector>

#include <unsupported/Eigen/BVH>

#include "yamabe/mesh.hpp"

namespace yamabe {

struct CellHit {
  int cell = -1;
  Eigen::Vector4d barycentric = Eigen::Vector4d::Zero();
  bool inside = false;  // false: closest cell of a point outside the mesh
};

// Uniform bucket grid over cell bounding boxes.
class PointLocator {
 public:
  explicit PointLocator(std::shared_ptr<const SimplicialMesh> mesh);

  CellHit locate(const Point& p) const;
  const SimplicialMesh& mesh() const { return *mesh_; }

 private:
  Eigen::Vector4d barycentric(int cell, const Point& p) const;
  std::array<int, 3> bucket_of(const Point& p) const;

  std::shared_ptr<const SimplicialMesh> mesh_;
  Point lo_, cell_size_;
  std::array<int, 3> dims_{};
  std::vector<std::vector<int>> buckets_;
};

// P1 interpolation of vertex values and their (cellwise constant) gradient.
double interpolate(const SimplicialMesh& mesh, const CellHit& hit, const Eigen::VectorXd& values);
Point cell_gradient(const SimplicialMesh& mesh, int cell, const Eigen::VectorXd& values);

struct SurfacePoint {
  Point point;
  double distance = 0.0;
};

// Closest point of the dM surface (faces tagged Boundary) to p; brute force.
SurfacePoint closest_boundary_point(const SimplicialMesh& mesh, const Point& p);

// Same query through a bounding-volume hierarchy over the dM faces.
class SurfaceLocator {
 public:
  explicit SurfaceLocator(const SimplicialMesh& mesh);
  SurfacePoint closest(const Point& p) const;

 private:
  const SimplicialMesh* mesh_;
  Eigen::KdBVH<double, 3, int> tree_;
};

}  // namespace yamabe
