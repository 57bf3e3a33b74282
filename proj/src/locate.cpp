#include "yamabe/locate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace yamabe {

PointLocator::PointLocator(std::shared_ptr<const SimplicialMesh> mesh) : mesh_(std::move(mesh)) {
  const auto& v = mesh_->vertices();
  Point hi = v[0];
  lo_ = v[0];
  for (const Point& p : v) {
    lo_ = lo_.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Point span = (hi - lo_).cwiseMax(1e-12);
  const double per_axis = std::cbrt(static_cast<double>(mesh_->num_cells()) / 4.0);
  const double unit = std::cbrt(span.prod()) / std::max(per_axis, 1.0);
  for (int k = 0; k < 3; ++k) {
    dims_[k] = std::max(1, static_cast<int>(std::ceil(span[k] / unit)));
    cell_size_[k] = span[k] / dims_[k];
  }
  buckets_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
  for (std::size_t c = 0; c < mesh_->num_cells(); ++c) {
    const Cell& t = mesh_->cells()[c];
    Point a = v[t[0]], b = v[t[0]];
    for (int k = 1; k < 4; ++k) {
      a = a.cwiseMin(v[t[k]]);
      b = b.cwiseMax(v[t[k]]);
    }
    const auto i0 = bucket_of(a), i1 = bucket_of(b);
    for (int x = i0[0]; x <= i1[0]; ++x) {
      for (int y = i0[1]; y <= i1[1]; ++y) {
        for (int z = i0[2]; z <= i1[2]; ++z) {
          buckets_[(static_cast<std::size_t>(x) * dims_[1] + y) * dims_[2] + z].push_back(static_cast<int>(c));
        }
      }
    }
  }
}

std::array<int, 3> PointLocator::bucket_of(const Point& p) const {
  std::array<int, 3> idx{};
  for (int k = 0; k < 3; ++k) {
    idx[k] = std::clamp(static_cast<int>(std::floor((p[k] - lo_[k]) / cell_size_[k])), 0, dims_[k] - 1);
  }
  return idx;
}

Eigen::Vector4d PointLocator::barycentric(int cell, const Point& p) const {
  const auto& v = mesh_->vertices();
  const Cell& t = mesh_->cells()[static_cast<std::size_t>(cell)];
  Eigen::Matrix3d jac;
  jac.col(0) = v[t[1]] - v[t[0]];
  jac.col(1) = v[t[2]] - v[t[0]];
  jac.col(2) = v[t[3]] - v[t[0]];
  const Eigen::Vector3d l = jac.partialPivLu().solve(p - v[t[0]]);
  return {1.0 - l.sum(), l[0], l[1], l[2]};
}

CellHit PointLocator::locate(const Point& p) const {
  CellHit best;
  double best_min = -std::numeric_limits<double>::infinity();
  auto consider = [&](int c) {
    const Eigen::Vector4d b = barycentric(c, p);
    const double m = b.minCoeff();
    if (m > best_min) {
      best_min = m;
      best.cell = c;
      best.barycentric = b;
    }
  };
  const auto idx = bucket_of(p);
  for (int c : buckets_[(static_cast<std::size_t>(idx[0]) * dims_[1] + idx[1]) * dims_[2] + idx[2]]) {
    consider(c);
    if (best_min >= -1e-12) break;
  }
  if (best_min < -1e-12) {
    for (std::size_t c = 0; c < mesh_->num_cells(); ++c) consider(static_cast<int>(c));
  }
  best.inside = best_min >= -1e-12;
  return best;
}

double interpolate(const SimplicialMesh& mesh, const CellHit& hit, const Eigen::VectorXd& values) {
  const Cell& t = mesh.cells()[static_cast<std::size_t>(hit.cell)];
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += hit.barycentric[k] * values[t[k]];
  return s;
}

Point cell_gradient(const SimplicialMesh& mesh, int cell, const Eigen::VectorXd& values) {
  const auto& v = mesh.vertices();
  const Cell& t = mesh.cells()[static_cast<std::size_t>(cell)];
  Eigen::Matrix3d jac;
  jac.row(0) = (v[t[1]] - v[t[0]]).transpose();
  jac.row(1) = (v[t[2]] - v[t[0]]).transpose();
  jac.row(2) = (v[t[3]] - v[t[0]]).transpose();
  const Eigen::Vector3d d(values[t[1]] - values[t[0]], values[t[2]] - values[t[0]], values[t[3]] - values[t[0]]);
  return jac.partialPivLu().solve(d);
}

namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Point closest_on_triangle(const Point& p, const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Point bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Point cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

SurfacePoint closest_boundary_point(const SimplicialMesh& mesh, const Point& p) {
  const auto& v = mesh.vertices();
  SurfacePoint best{p, std::numeric_limits<double>::infinity()};
  for (int f : mesh.dm_faces()) {
    const Face& face = mesh.boundary_faces()[static_cast<std::size_t>(f)];
    const Point q = closest_on_triangle(p, v[face[0]], v[face[1]], v[face[2]]);
    const double d = (q - p).norm();
    if (d < best.distance) best = {q, d};
  }
  return best;
}

SurfaceLocator::SurfaceLocator(const SimplicialMesh& mesh) : mesh_(&mesh) {
  const auto& v = mesh.vertices();
  std::vector<int> faces = mesh.dm_faces();
  std::vector<Eigen::AlignedBox3d> boxes;
  boxes.reserve(faces.size());
  for (int f : faces) {
    const Face& face = mesh.boundary_faces()[static_cast<std::size_t>(f)];
    Eigen::AlignedBox3d box(v[face[0]]);
    box.extend(v[face[1]]).extend(v[face[2]]);
    boxes.push_back(box);
  }
  tree_.init(faces.begin(), faces.end(), boxes.begin(), boxes.end());
}

SurfacePoint SurfaceLocator::closest(const Point& p) const {
  struct Minimizer {
    using Scalar = double;
    const SimplicialMesh* mesh;
    Point p;
    SurfacePoint best{Point::Zero(), std::numeric_limits<double>::infinity()};
    double minimumOnVolume(const Eigen::AlignedBox3d& box) const { return box.exteriorDistance(p); }
    double minimumOnObject(int f) {
      const auto& v = mesh->vertices();
      const Face& face = mesh->boundary_faces()[static_cast<std::size_t>(f)];
      const Point q = closest_on_triangle(p, v[face[0]], v[face[1]], v[face[2]]);
      const double d = (q - p).norm();
      if (d < best.distance || (d == best.distance && f < best_face)) {
        best = {q, d};
        best_face = f;
      }
      return d;
    }
    int best_face = -1;
  } m{mesh_, p};
  Eigen::BVMinimize(tree_, m);
  return m.best;
}

}  // namespace yamabe
