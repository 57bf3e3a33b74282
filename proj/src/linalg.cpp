#include "yamabe/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>

#include "yamabe/error.hpp"

namespace yamabe {

Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, const Eigen::VectorXd& guess,
                          double tol) {
  const auto n = a.rows();
  if (b.squaredNorm() == 0.0) return Eigen::VectorXd::Zero(n);
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(static_cast<Eigen::Index>(50.0 * std::sqrt(static_cast<double>(n))) + 1);
  cg.compute(a);
  Eigen::VectorXd x = guess.size() == n ? cg.solveWithGuess(b, guess) : Eigen::VectorXd(cg.solve(b));
  if (cg.info() != Eigen::Success || !x.allFinite()) {
    throw Error(ErrorCode::SolverDiverged, "conjugate gradients stopped after " + std::to_string(cg.iterations()) +
                                               " iterations with relative residual " +
                                               std::to_string(cg.error()));
  }
  return x;
}

SparseMatrix submatrix(const SparseMatrix& a, const std::vector<int>& rows, const std::vector<int>& cols) {
  std::vector<int> row_map(static_cast<std::size_t>(a.rows()), -1), col_map(static_cast<std::size_t>(a.cols()), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_map[rows[i]] = static_cast<int>(i);
  for (std::size_t j = 0; j < cols.size(); ++j) col_map[cols[j]] = static_cast<int>(j);
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      const int r = row_map[it.row()], c = col_map[it.col()];
      if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

DirichletProblem::DirichletProblem(const SparseMatrix& op, std::vector<int> fixed)
    : n_(static_cast<std::size_t>(op.rows())), fixed_(std::move(fixed)) {
  std::vector<char> is_fixed(n_, 0);
  for (int v : fixed_) is_fixed[v] = 1;
  for (std::size_t i = 0; i < n_; ++i) {
    if (!is_fixed[i]) free_.push_back(static_cast<int>(i));
  }
  a_ff_ = submatrix(op, free_, free_);
  a_fx_ = submatrix(op, free_, fixed_);
}

Eigen::VectorXd DirichletProblem::solve(const Eigen::VectorXd& fixed_values, const Eigen::VectorXd& guess,
                                        double tol) const {
  return solve(fixed_values, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_.size())), guess, tol);
}

Eigen::VectorXd DirichletProblem::solve(const Eigen::VectorXd& fixed_values, const Eigen::VectorXd& free_load,
                                        const Eigen::VectorXd& guess, double tol) const {
  Eigen::VectorXd full(static_cast<Eigen::Index>(n_));
  for (std::size_t k = 0; k < fixed_.size(); ++k) full[fixed_[k]] = fixed_values[static_cast<Eigen::Index>(k)];
  if (free_.empty()) return full;
  const Eigen::VectorXd rhs = free_load - a_fx_ * fixed_values;
  Eigen::VectorXd x0;
  if (guess.size() == static_cast<Eigen::Index>(n_)) {
    x0.resize(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) x0[static_cast<Eigen::Index>(k)] = guess[free_[k]];
  }
  const Eigen::VectorXd x = solve_spd(a_ff_, rhs, x0, tol);
  for (std::size_t k = 0; k < free_.size(); ++k) full[free_[k]] = x[static_cast<Eigen::Index>(k)];
  return full;
}

}  // namespace yamabe
