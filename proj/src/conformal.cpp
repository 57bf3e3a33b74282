#include "yamabe/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "yamabe/error.hpp"

namespace yamabe {

ConformalConstants::ConformalConstants(int dim)
    : n(dim),
      laplacian(4.0 * (dim - 1) / (dim - 2)),
      boundary(2.0 * (dim - 1) / (dim - 2)),
      critical(2.0 * (dim - 1) / (dim - 2)),
      volume(2.0 * dim / (dim - 2)) {
  if (dim < 3) throw Error(ErrorCode::UnsupportedDimension, "conformal constants need n >= 3");
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

Eigen::Matrix<double, 4, 3> barycentric_gradients(const SimplicialMesh& mesh, const Cell& t) {
  const auto& v = mesh.vertices();
  Eigen::Matrix3d jac;
  jac.col(0) = v[t[1]] - v[t[0]];
  jac.col(1) = v[t[2]] - v[t[0]];
  jac.col(2) = v[t[3]] - v[t[0]];
  const Eigen::Matrix3d inv = jac.inverse();
  Eigen::Matrix<double, 4, 3> g;
  g.row(1) = inv.row(0);
  g.row(2) = inv.row(1);
  g.row(3) = inv.row(2);
  g.row(0) = -(g.row(1) + g.row(2) + g.row(3));
  return g;
}

// P1 stiffness with a per-cell coefficient equal to the mean of `coef` over
// the cell vertices (empty `coef` means 1).
SparseMatrix weighted_stiffness(const SimplicialMesh& mesh, const Eigen::VectorXd& coef) {
  Triplets trips;
  trips.reserve(mesh.num_cells() * 16);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const Cell& t = mesh.cells()[c];
    const auto g = barycentric_gradients(mesh, t);
    double w = mesh.cell_volume(c);
    if (coef.size() > 0) w *= 0.25 * (coef[t[0]] + coef[t[1]] + coef[t[2]] + coef[t[3]]);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) trips.emplace_back(t[a], t[b], w * g.row(a).dot(g.row(b)));
    }
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  SparseMatrix k(n, n);
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

SparseMatrix diagonal(const Eigen::VectorXd& d) {
  SparseMatrix m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Ones(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) m.insert(i, i) = d[i];
  m.makeCompressed();
  return m;
}

// Pointwise Euclidean Laplacian from the lumped stiffness rows; boundary and
// far-field vertices take the mean of their free neighbours.
Eigen::VectorXd pointwise_laplacian(const SimplicialMesh& mesh, const SparseMatrix& k, const Eigen::VectorXd& f) {
  const Eigen::VectorXd kf = k * f;
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  Eigen::VectorXd lap = Eigen::VectorXd::Zero(n);
  std::vector<char> exterior(static_cast<std::size_t>(n), 0);
  for (const Face& face : mesh.boundary_faces()) {
    for (int v : face) exterior[v] = 1;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!exterior[i]) lap[i] = -kf[i] / mesh.lumped_volume()[i];
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), count = Eigen::VectorXd::Zero(n);
  for (const auto& e : mesh.edges()) {
    for (int s = 0; s < 2; ++s) {
      const int a = e[s], b = e[1 - s];
      if (exterior[a] && !exterior[b]) {
        sum[a] += lap[b];
        count[a] += 1.0;
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (exterior[i] && count[i] > 0) lap[i] = sum[i] / count[i];
  }
  return lap;
}

}  // namespace

BoundaryField embedded_boundary_curvature(const SimplicialMesh& mesh) {
  const auto& v = mesh.vertices();
  // Pair up dM faces across their shared edges.
  std::map<std::array<int, 2>, std::vector<int>> edge_faces;
  for (int f : mesh.dm_faces()) {
    const Face& face = mesh.boundary_faces()[f];
    for (int k = 0; k < 3; ++k) {
      std::array<int, 2> e{face[k], face[(k + 1) % 3]};
      if (e[0] > e[1]) std::swap(e[0], e[1]);
      edge_faces[e].push_back(f);
    }
  }
  const auto nb = static_cast<Eigen::Index>(mesh.boundary_vertices().size());
  Eigen::VectorXd integrated = Eigen::VectorXd::Zero(nb);
  // Voronoi area of each vertex: sum over incident edges of
  // (cot a + cot b) |e|^2 / 8.
  Eigen::VectorXd voronoi = Eigen::VectorXd::Zero(nb);
  for (int f : mesh.dm_faces()) {
    const Face& face = mesh.boundary_faces()[f];
    for (int k = 0; k < 3; ++k) {
      const Point& apex = v[face[k]];
      const Point& p = v[face[(k + 1) % 3]];
      const Point& q = v[face[(k + 2) % 3]];
      const double cot = (p - apex).dot(q - apex) / (p - apex).cross(q - apex).norm();
      const double w = cot * (p - q).squaredNorm() / 8.0;
      voronoi[mesh.boundary_slot(face[(k + 1) % 3])] += w;
      voronoi[mesh.boundary_slot(face[(k + 2) % 3])] += w;
    }
  }
  for (const auto& [e, faces] : edge_faces) {
    if (faces.size() != 2) continue;
    const Point n1 = mesh.face_normal(faces[0]);
    const Point n2 = mesh.face_normal(faces[1]);
    const double angle = std::atan2(n1.cross(n2).norm(), n1.dot(n2));
    // Convex edge when the far vertex of the second face lies below the
    // plane of the first.
    int far = -1;
    for (int idx : mesh.boundary_faces()[faces[1]]) {
      if (idx != e[0] && idx != e[1]) far = idx;
    }
    const double sign = (v[far] - v[e[0]]).dot(n1) <= 0.0 ? 1.0 : -1.0;
    const double contribution = 0.5 * sign * angle * (v[e[1]] - v[e[0]]).norm();
    integrated[mesh.boundary_slot(e[0])] += contribution;
    integrated[mesh.boundary_slot(e[1])] += contribution;
  }
  return BoundaryField{integrated.cwiseQuotient(voronoi)};
}

DiscreteOperators assemble(const SimplicialMesh& mesh) {
  return assemble(std::make_shared<const SimplicialMesh>(mesh));
}

DiscreteOperators assemble(std::shared_ptr<const SimplicialMesh> mesh_ptr) {
  const SimplicialMesh& mesh = *mesh_ptr;
  const double scale = std::pow(mesh.diameter(), 3);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    if (mesh.cell_volume(c) < 1e-14 * scale) {
      throw Error(ErrorCode::DegenerateCell, "cell " + std::to_string(c) + " has volume " +
                                                 std::to_string(mesh.cell_volume(c)));
    }
  }
  const ConformalConstants k(mesh.dimension());
  DiscreteOperators ops;
  ops.mesh = mesh_ptr;
  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  const BoundaryField h_embedded = embedded_boundary_curvature(mesh);

  if (mesh.metric().is_euclidean()) {
    ops.stiffness = weighted_stiffness(mesh, {});
    ops.volume_weights = mesh.lumped_volume();
    ops.boundary_weights = mesh.boundary_lumped_area();
    ops.scalar_curvature = Eigen::VectorXd::Zero(nv);
    ops.mean_curvature = h_embedded;
  } else {
    const Eigen::VectorXd& phi = *mesh.metric().conformal_factor;
    const int n = mesh.dimension();
    ops.stiffness = weighted_stiffness(mesh, phi.array().square().matrix());
    ops.volume_weights = mesh.lumped_volume().array() * phi.array().pow(k.volume);
    const SparseMatrix k_eucl = weighted_stiffness(mesh, {});
    const Eigen::VectorXd lap = pointwise_laplacian(mesh, k_eucl, phi);
    ops.scalar_curvature = (-k.laplacian * lap.array() * phi.array().pow(-(n + 2.0) / (n - 2.0))).matrix();

    const auto& bv = mesh.boundary_vertices();
    ops.boundary_weights.resize(static_cast<Eigen::Index>(bv.size()));
    ops.mean_curvature.values.resize(static_cast<Eigen::Index>(bv.size()));
    const Eigen::VectorXd flux = k_eucl * phi;
    for (std::size_t s = 0; s < bv.size(); ++s) {
      const int i = bv[s];
      const auto si = static_cast<Eigen::Index>(s);
      const double area = mesh.boundary_lumped_area()[si];
      ops.boundary_weights[si] = area * std::pow(phi[i], k.critical);
      // -d_eta phi from the consistent flux, corrected by the interior
      // Laplacian carried by the boundary row.
      const double minus_deta = (flux[i] + mesh.lumped_volume()[i] * lap[i]) / area;
      ops.mean_curvature.values[si] =
          std::pow(phi[i], -n / (n - 2.0)) * (k.boundary * minus_deta + h_embedded.values[si] * phi[i]);
    }
  }
  ops.interior_mass = diagonal(ops.volume_weights);
  Eigen::VectorXd bfull = Eigen::VectorXd::Zero(nv);
  for (std::size_t s = 0; s < mesh.boundary_vertices().size(); ++s) {
    bfull[mesh.boundary_vertices()[s]] = ops.boundary_weights[static_cast<Eigen::Index>(s)];
  }
  ops.boundary_mass = diagonal(bfull);
  ops.conformal_stiffness = ops.stiffness;
  if (!mesh.metric().is_euclidean()) {
    ops.conformal_stiffness +=
        diagonal((ops.volume_weights.array() * ops.scalar_curvature.array() / k.laplacian).matrix());
  }
  return ops;
}

DiscreteOperators with_boundary_curvature(DiscreteOperators ops, BoundaryField h0) {
  if (h0.values.size() != static_cast<Eigen::Index>(ops.m().boundary_vertices().size())) {
    throw Error(ErrorCode::InvalidArgument, "boundary curvature field has the wrong size");
  }
  ops.mean_curvature = std::move(h0);
  return ops;
}

FarFieldValues sample_farfield(const SimplicialMesh& mesh, const std::function<double(const Point&)>& f) {
  const auto& ff = mesh.farfield_vertices();
  FarFieldValues out{Eigen::VectorXd(static_cast<Eigen::Index>(ff.size()))};
  for (std::size_t k = 0; k < ff.size(); ++k) out.values[static_cast<Eigen::Index>(k)] = f(mesh.vertices()[ff[k]]);
  return out;
}

namespace {

std::vector<int> dirichlet_set(const SimplicialMesh& mesh) {
  std::vector<int> fixed = mesh.boundary_vertices();
  for (int v : mesh.farfield_vertices()) {
    if (!mesh.is_boundary_vertex(v)) fixed.push_back(v);
  }
  return fixed;
}

}  // namespace

HarmonicExtension::HarmonicExtension(const DiscreteOperators& ops)
    : ops_(&ops), problem_(ops.conformal_stiffness, dirichlet_set(ops.m())) {}

ScalarField HarmonicExtension::operator()(const BoundaryField& trace, const std::optional<FarFieldValues>& farfield,
                                          const ScalarField* guess) const {
  const SimplicialMesh& mesh = ops_->m();
  const auto& bv = mesh.boundary_vertices();
  if (trace.values.size() != static_cast<Eigen::Index>(bv.size())) {
    throw Error(ErrorCode::InvalidArgument, "boundary trace has the wrong size");
  }
  if (!trace.values.allFinite()) throw Error(ErrorCode::InvalidArgument, "boundary trace is not finite");
  if (mesh.has_farfield() && !farfield) {
    throw Error(ErrorCode::MissingFarField, "half-space meshes need far-field Dirichlet data");
  }
  const auto& fixed = problem_.fixed();
  Eigen::VectorXd values(static_cast<Eigen::Index>(fixed.size()));
  values.head(static_cast<Eigen::Index>(bv.size())) = trace.values;
  if (fixed.size() > bv.size()) {
    const auto& ff = mesh.farfield_vertices();
    if (farfield->values.size() != static_cast<Eigen::Index>(ff.size())) {
      throw Error(ErrorCode::InvalidArgument, "far-field data has the wrong size");
    }
    Eigen::Index k = static_cast<Eigen::Index>(bv.size());
    for (std::size_t j = 0; j < ff.size(); ++j) {
      if (!mesh.is_boundary_vertex(ff[j])) values[k++] = farfield->values[static_cast<Eigen::Index>(j)];
    }
  }
  return ScalarField{problem_.solve(values, guess ? guess->values : Eigen::VectorXd())};
}

double HarmonicExtension::interior_residual(const ScalarField& u) const {
  const Eigen::VectorXd r = ops_->conformal_stiffness * u.values;
  double s = 0.0;
  for (int i : problem_.free()) s += r[i] * r[i];
  return std::sqrt(s);
}

ScalarField harmonic_extension(const DiscreteOperators& ops, const BoundaryField& trace,
                               const std::optional<FarFieldValues>& farfield) {
  return HarmonicExtension(ops)(trace, farfield);
}

CurvatureReport curvature(const DiscreteOperators& ops, const ScalarField& u, int n) {
  const SimplicialMesh& mesh = ops.m();
  const ConformalConstants k(n);
  if (u.values.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw Error(ErrorCode::InvalidArgument, "field size differs from vertex count");
  }
  if (!u.values.allFinite() || u.values.minCoeff() <= 0.0) {
    throw Error(ErrorCode::NonpositiveConformalFactor, "conformal factor must be positive at every vertex");
  }
  const Eigen::VectorXd flux = ops.conformal_stiffness * u.values;
  const auto& bv = mesh.boundary_vertices();
  CurvatureReport rep;
  rep.H.values.resize(static_cast<Eigen::Index>(bv.size()));
  double weighted = 0.0;
  for (std::size_t s = 0; s < bv.size(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const double ui = u.values[bv[s]];
    const double a = ops.boundary_weights[si];
    const double h = std::pow(ui, -n / (n - 2.0)) * (k.boundary * flux[bv[s]] / a + ops.mean_curvature.values[si] * ui);
    rep.H.values[si] = h;
    const double dsigma = a * std::pow(ui, k.critical);
    rep.area += dsigma;
    weighted += dsigma * h;
  }
  rep.Hbar = weighted / rep.area;
  double r2 = 0.0;
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const auto v = static_cast<int>(i);
    if (!mesh.is_boundary_vertex(v) && !mesh.is_farfield_vertex(v)) r2 += flux[v] * flux[v];
  }
  rep.R_residual = std::sqrt(r2);
  return rep;
}

double energy_numerator(const DiscreteOperators& ops, const ScalarField& u, int n) {
  const ConformalConstants k(n);
  const auto& bv = ops.m().boundary_vertices();
  double boundary_term = 0.0;
  for (std::size_t s = 0; s < bv.size(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const double ui = u.values[bv[s]];
    boundary_term += ops.boundary_weights[si] * ops.mean_curvature.values[si] * ui * ui;
  }
  return k.laplacian * u.values.dot(ops.conformal_stiffness * u.values) + 2.0 * boundary_term;
}

namespace {

double critical_boundary_mass(const DiscreteOperators& ops, const ScalarField& u, int n) {
  const ConformalConstants k(n);
  const auto& bv = ops.m().boundary_vertices();
  double a = 0.0;
  for (std::size_t s = 0; s < bv.size(); ++s) {
    a += ops.boundary_weights[static_cast<Eigen::Index>(s)] * std::pow(std::abs(u.values[bv[s]]), k.critical);
  }
  if (!(a > 0.0)) throw Error(ErrorCode::ZeroBoundaryTrace, "u vanishes identically on the boundary");
  return a;
}

}  // namespace

double energy_E(const DiscreteOperators& ops, const ScalarField& u, int n) {
  const double a = critical_boundary_mass(ops, u, n);
  return energy_numerator(ops, u, n) / std::pow(a, (n - 2.0) / (n - 1.0));
}

double energy_F(const DiscreteOperators& ops, const ScalarField& u, int n) {
  const double a = critical_boundary_mass(ops, u, n);
  return energy_numerator(ops, u, n) / a;
}

std::vector<SteklovPair> steklov_eigensolve(const DiscreteOperators& ops, const BoundaryField& weight,
                                            const BoundaryField& h0, int count) {
  const SimplicialMesh& mesh = ops.m();
  const ConformalConstants k(mesh.dimension());
  const auto& bv = mesh.boundary_vertices();
  const auto nb = static_cast<Eigen::Index>(bv.size());
  if (weight.values.size() != nb || h0.values.size() != nb) {
    throw Error(ErrorCode::InvalidArgument, "weight and curvature must be boundary fields");
  }
  if (weight.values.minCoeff() <= 0.0) throw Error(ErrorCode::InvalidArgument, "weight must be positive");
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");

  // Far-field vertices are clamped to zero; the remaining boundary slots
  // carry the eigenproblem.
  std::vector<int> fixed;
  for (int v : mesh.farfield_vertices()) fixed.push_back(v);
  std::vector<Eigen::Index> active;
  for (Eigen::Index s = 0; s < nb; ++s) {
    if (!mesh.is_farfield_vertex(bv[static_cast<std::size_t>(s)])) active.push_back(s);
  }
  const auto na = static_cast<Eigen::Index>(active.size());
  if (count > na) {
    throw Error(ErrorCode::SolverDiverged, "requested " + std::to_string(count) + " eigenpairs but only " +
                                               std::to_string(na) + " boundary degrees of freedom exist");
  }

  Eigen::VectorXd robin = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  Eigen::VectorXd w(na);
  for (Eigen::Index a = 0; a < na; ++a) {
    const Eigen::Index s = active[static_cast<std::size_t>(a)];
    robin[bv[static_cast<std::size_t>(s)]] = ops.boundary_weights[s] * h0.values[s];
    w[a] = ops.boundary_weights[s] * weight.values[s];
  }
  SparseMatrix op = k.boundary * ops.conformal_stiffness;
  for (Eigen::Index i = 0; i < robin.size(); ++i) {
    if (robin[i] != 0.0) op.coeffRef(i, i) += robin[i];
  }
  const DirichletProblem problem(op, fixed);
  std::vector<int> free_pos(mesh.num_vertices(), -1);
  for (std::size_t j = 0; j < problem.free().size(); ++j) free_pos[problem.free()[j]] = static_cast<int>(j);

  const Eigen::Index block = std::min<Eigen::Index>(na, std::max<Eigen::Index>(count + 8, 2 * count));
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd y(na, block);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index a = 0; a < na; ++a) y(a, j) = normal(rng);
  }
  const Eigen::VectorXd zero_fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fixed.size()));
  const auto nfree = static_cast<Eigen::Index>(problem.free().size());

  Eigen::MatrixXd z(static_cast<Eigen::Index>(mesh.num_vertices()), block);
  Eigen::MatrixXd xb(na, block);
  Eigen::VectorXd ritz, previous;
  Eigen::MatrixXd coeffs;
  constexpr int kMaxIterations = 500;
  int it = 0;
  for (; it < kMaxIterations; ++it) {
    for (Eigen::Index j = 0; j < block; ++j) {
      Eigen::VectorXd load = Eigen::VectorXd::Zero(nfree);
      for (Eigen::Index a = 0; a < na; ++a) {
        load[free_pos[bv[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])]]] = w[a] * y(a, j);
      }
      const Eigen::VectorXd guess = it > 0 ? Eigen::VectorXd(z.col(j)) : Eigen::VectorXd();
      z.col(j) = problem.solve(zero_fixed, load, guess, kSolverTolerance);
      for (Eigen::Index a = 0; a < na; ++a) xb(a, j) = z(bv[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])], j);
    }
    Eigen::MatrixXd s_hat = xb.transpose() * w.asDiagonal() * y;
    s_hat = 0.5 * (s_hat + s_hat.transpose()).eval();
    Eigen::MatrixXd w_hat = xb.transpose() * w.asDiagonal() * xb;
    w_hat = 0.5 * (w_hat + w_hat.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(s_hat, w_hat);
    if (ges.info() != Eigen::Success) throw Error(ErrorCode::SolverDiverged, "Rayleigh-Ritz step failed");
    ritz = ges.eigenvalues();
    coeffs = ges.eigenvectors();
    y = xb * coeffs;
    z = z * coeffs;
    if (previous.size() == ritz.size()) {
      const double change =
          ((ritz.head(count) - previous.head(count)).array().abs() / ritz.head(count).array().abs().max(1e-300))
              .maxCoeff();
      if (change < 1e-13) break;
    }
    previous = ritz;
  }
  if (it == kMaxIterations) throw Error(ErrorCode::SolverDiverged, "subspace iteration did not converge");

  std::vector<SteklovPair> out;
  for (int a = 0; a < count; ++a) out.push_back({ritz[a], ScalarField{z.col(a)}});
  return out;
}

Eigen::MatrixXd steklov_gram(const DiscreteOperators& ops, const std::vector<SteklovPair>& pairs,
                             const BoundaryField& weight) {
  const auto& bv = ops.m().boundary_vertices();
  const auto m = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t s = 0; s < bv.size(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const double w = ops.boundary_weights[si] * weight.values[si];
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        g(a, b) += w * pairs[static_cast<std::size_t>(a)].psi.values[bv[s]] *
                   pairs[static_cast<std::size_t>(b)].psi.values[bv[s]];
      }
    }
  }
  return g;
}

CovarianceDefect conformal_covariance_defect(const SimplicialMesh& mesh, const ScalarField& u,
                                             const ScalarField& zeta, int n) {
  if (!mesh.metric().is_euclidean()) {
    throw Error(ErrorCode::InvalidArgument, "covariance defect is measured against a Euclidean background");
  }
  if (u.values.minCoeff() <= 0.0) throw Error(ErrorCode::NonpositiveConformalFactor, "u must be positive");
  const ConformalConstants k(n);
  const SparseMatrix k0 = weighted_stiffness(mesh, {});
  const SparseMatrix kg = weighted_stiffness(mesh, u.values.array().square().matrix());
  const Eigen::VectorXd f = zeta.values.cwiseQuotient(u.values);
  // K_g(zeta/u) + zeta K u - u K zeta: the discrete form of
  // div(u^2 grad(zeta/u)) - (u Lap zeta - zeta Lap u), which vanishes in
  // the continuum.
  const Eigen::VectorXd bracket =
      kg * f + zeta.values.cwiseProduct(k0 * u.values) - u.values.cwiseProduct(k0 * zeta.values);

  CovarianceDefect d{0.0, 0.0};
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const auto v = static_cast<int>(i);
    const double ui = u.values[v];
    if (mesh.is_boundary_vertex(v)) {
      const double a = mesh.boundary_lumped_area()[mesh.boundary_slot(v)];
      const double defect = -k.boundary * std::pow(ui, -k.critical) * bracket[v] / a;
      d.boundary += a * defect * defect;
    } else if (!mesh.is_farfield_vertex(v)) {
      const double vol = mesh.lumped_volume()[v];
      const double defect = -k.laplacian * std::pow(ui, -k.volume) * bracket[v] / vol;
      d.interior += vol * defect * defect;
    }
  }
  d.interior = std::sqrt(d.interior);
  d.boundary = std::sqrt(d.boundary);
  return d;
}

}  // namespace yamabe
