#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace yamabe {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kSolverTolerance = 1e-10;

// Diagonally preconditioned conjugate gradients with relative tolerance
// `tol` and an iteration cap of 50 * sqrt(dof). Throws SolverDiverged when
// the cap is reached.
Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, const Eigen::VectorXd& guess,
                          double tol = kSolverTolerance);

// Rows/columns of `a` selected by `rows` x `cols` (index lists).
SparseMatrix submatrix(const SparseMatrix& a, const std::vector<int>& rows, const std::vector<int>& cols);

// Symmetric Dirichlet problem: unknowns at `free` vertices, prescribed
// values at all others. The system matrix and preconditioner are factored
// once and reused across solves.
class DirichletProblem {
 public:
  DirichletProblem(const SparseMatrix& op, std::vector<int> fixed);

  // Full solution vector given values on the fixed set (ordered as `fixed`).
  // `guess` (full vector, may be empty) seeds the free unknowns.
  Eigen::VectorXd solve(const Eigen::VectorXd& fixed_values, const Eigen::VectorXd& guess = {},
                        double tol = kSolverTolerance) const;

  // Same, with a load vector on the free rows.
  Eigen::VectorXd solve(const Eigen::VectorXd& fixed_values, const Eigen::VectorXd& free_load,
                        const Eigen::VectorXd& guess, double tol) const;

  const std::vector<int>& free() const { return free_; }
  const std::vector<int>& fixed() const { return fixed_; }
  const SparseMatrix& free_block() const { return a_ff_; }

 private:
  std::size_t n_ = 0;
  std::vector<int> free_;
  std::vector<int> fixed_;
  SparseMatrix a_ff_;
  SparseMatrix a_fx_;
};

}  // namespace yamabe
