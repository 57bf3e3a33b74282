#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "yamabe/linalg.hpp"
#include "yamabe/mesh.hpp"

namespace yamabe {

// Dimensional constants of the conformal Laplacian in dimension n.
struct ConformalConstants {
  int n;
  double laplacian;  // 4(n-1)/(n-2)
  double boundary;   // 2(n-1)/(n-2)
  double critical;   // 2(n-1)/(n-2), exponent of the boundary area density
  double volume;     // 2n/(n-2)

  explicit ConformalConstants(int dim);
};

// Piecewise-linear operators of the background metric g0.
struct DiscreteOperators {
  std::shared_ptr<const SimplicialMesh> mesh;
  // Weak -Laplacian of g0: K_ij = int <d phi_i, d phi_j>_{g0} dv_{g0}.
  SparseMatrix stiffness;
  // Lumped (diagonal) volume and boundary-area matrices of g0.
  SparseMatrix interior_mass;
  SparseMatrix boundary_mass;
  Eigen::VectorXd volume_weights;    // per vertex
  Eigen::VectorXd boundary_weights;  // per boundary slot
  // Weak conformal Laplacian K + (n-2)/(4(n-1)) R_{g0} M; equals the
  // stiffness for the Euclidean metric.
  SparseMatrix conformal_stiffness;
  // Scalar curvature of g0 per vertex (zero for the Euclidean metric).
  Eigen::VectorXd scalar_curvature;
  // Trace of the second fundamental form of dM in g0, per boundary slot.
  BoundaryField mean_curvature;

  const SimplicialMesh& m() const { return *mesh; }
  int dimension() const { return mesh->dimension(); }
};

DiscreteOperators assemble(std::shared_ptr<const SimplicialMesh> mesh);
DiscreteOperators assemble(const SimplicialMesh& mesh);

// Operators whose boundary curvature is replaced by a caller-supplied field
// (e.g. the exact value 2 of the unit sphere).
DiscreteOperators with_boundary_curvature(DiscreteOperators ops, BoundaryField h0);

// Discrete trace of the second fundamental form of the embedded dM surface
// (edge normal-jump estimator, sum of principal curvatures).
BoundaryField embedded_boundary_curvature(const SimplicialMesh& mesh);

// Values on far-field vertices, ordered as SimplicialMesh::farfield_vertices().
struct FarFieldValues {
  Eigen::VectorXd values;
};

FarFieldValues sample_farfield(const SimplicialMesh& mesh, const std::function<double(const Point&)>& f);

// Solves the discrete Dirichlet problem for the conformal Laplacian of g0
// (Laplace's equation for the Euclidean metric). The solver is built once.
class HarmonicExtension {
 public:
  explicit HarmonicExtension(const DiscreteOperators& ops);

  ScalarField operator()(const BoundaryField& trace, const std::optional<FarFieldValues>& farfield = std::nullopt,
                         const ScalarField* guess = nullptr) const;

  // Euclidean norm of the free-row residual of the interior equation.
  double interior_residual(const ScalarField& u) const;

 private:
  const DiscreteOperators* ops_;
  DirichletProblem problem_;
};

ScalarField harmonic_extension(const DiscreteOperators& ops, const BoundaryField& trace,
                               const std::optional<FarFieldValues>& farfield = std::nullopt);

struct CurvatureReport {
  BoundaryField H;       // trace of the second fundamental form of g = u^{4/(n-2)} g0
  double Hbar = 0.0;     // dsigma_g-weighted average of H
  double area = 0.0;     // int dsigma_g
  double R_residual = 0.0;
};

// Boundary curvature of u^{4/(n-2)} g0. The inward normal derivative of u
// is recovered from the consistent flux (conformal_stiffness * u) at the
// boundary rows, divided by the lumped boundary weight.
CurvatureReport curvature(const DiscreteOperators& ops, const ScalarField& u, int n);

// Numerator of the energy quotients:
// 4(n-1)/(n-2) int |du|^2 + int R_{g0} u^2 + 2 int H_{g0} u^2.
double energy_numerator(const DiscreteOperators& ops, const ScalarField& u, int n);
double energy_E(const DiscreteOperators& ops, const ScalarField& u, int n);
double energy_F(const DiscreteOperators& ops, const ScalarField& u, int n);

struct SteklovPair {
  double lambda;
  ScalarField psi;
};

// Smallest `count` eigenpairs of
//   Delta_{g0} psi = 0 in M,
//   2(n-1)/(n-2) d_eta psi - H0 psi + lambda w psi = 0 on dM,
// normalized by int_dM psi_a psi_b w dsigma = delta_ab. Subspace iteration
// on the boundary Schur complement with Rayleigh-Ritz projection.
std::vector<SteklovPair> steklov_eigensolve(const DiscreteOperators& ops, const BoundaryField& weight,
                                            const BoundaryField& h0, int count);

// Weighted boundary Gram matrix int psi_a psi_b w dsigma of Steklov pairs.
Eigen::MatrixXd steklov_gram(const DiscreteOperators& ops, const std::vector<SteklovPair>& pairs,
                             const BoundaryField& weight);

// Discrete conformal Laplacian and boundary operator of the metric
// u^{4/(n-2)} g0, re-assembled with the conformal factor (per-cell
// coefficient u^2, lumped masses) and with R_g, H_g from the discrete
// curvature formulas. Used to measure the covariance defects
//   L_g(zeta/u) - u^{-(n+2)/(n-2)} L_{g0} zeta  (interior rows),
//   B_g(zeta/u) - u^{-n/(n-2)} B_{g0} zeta      (boundary rows).
struct CovarianceDefect {
  double interior;  // lumped L2 norm over interior vertices
  double boundary;  // lumped L2 norm over boundary vertices
};
CovarianceDefect conformal_covariance_defect(const SimplicialMesh& mesh, const ScalarField& u,
                                             const ScalarField& zeta, int n);

}  // namespace yamabe
