#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace yamabe {

// section3:  U = (eps / ((eps + y_n)^2 + |ybar - a|^2))^{(n-2)/2},
//            dU/dy_n + (n-2) U^{n/(n-2)} = 0 on y_n = 0.
// appendixC: U = (eps / ((y_n + eps/(n-2))^2 + |ybar - a|^2))^{(n-2)/2},
//            dU/dy_n + U^{n/(n-2)} = 0 on y_n = 0.
enum class BubbleConvention { Section3, AppendixC };

struct Bubble {
  int n = 3;
  double epsilon = 1.0;
  Eigen::VectorXd center;  // a in R^{n-1}; empty means 0
  BubbleConvention convention = BubbleConvention::Section3;

  double shift() const;  // vertical offset of the pole below y_n = 0
  double boundary_constant() const;  // (n-2) or 1
};

double bubble_value(const Bubble& b, const Eigen::VectorXd& y);
Eigen::VectorXd bubble_gradient(const Bubble& b, const Eigen::VectorXd& y);
Eigen::MatrixXd bubble_hessian(const Bubble& b, const Eigen::VectorXd& y);

struct PdeResiduals {
  double interior = 0.0;  // max |Delta U|
  double boundary = 0.0;  // max |d_n U + c U^{n/(n-2)}|
};

// Points with y_n > 0 enter the interior residual, points with y_n = 0 the
// boundary residual.
PdeResiduals verify_bubble_pde(const Bubble& b, const std::vector<Eigen::VectorXd>& points);

// Max deviation between the analytic gradient and centred differences.
double gradient_fd_error(const Bubble& b, const std::vector<Eigen::VectorXd>& points, double h);

// Area of the unit sphere S^{k} in R^{k+1}.
double sphere_area(int k);

// K_n = ((n-2)/2)^{-1/2} sigma_{n-1}^{-1/(2(n-1))}.
double sobolev_constant(int n);
// beta* = K_n^{-2(n-1)} / (2(n-1)).
double bubble_energy(int n);

struct BubbleIntegrals {
  double dirichlet;  // int_{R^n_+} |dU|^2
  double boundary;   // int_{dR^n_+} U^{2(n-1)/(n-2)}
  double energy;     // 1/2 dirichlet - (n-2)/(2(n-1)) c boundary
};

// Direct quadrature of the energy integrals of a bubble (c is the
// convention's boundary constant). Throws QuadratureNotConverged.
BubbleIntegrals bubble_energy_quadrature(const Bubble& b, double tol = 1e-10);

// Q(B^n, dB^n) = 4(n-1) (int_{dR^n_+} U_eps^{2(n-1)/(n-2)})^{1/(n-1)} by
// adaptive radial quadrature (section3 bubble).
double qball(int n, double epsilon = 1.0, double tol = 1e-8);

// Trace Sobolev quotient (int_{dR^n_+} |u|^q)^{(n-2)/(n-1)} / int_{R^n_+}|du|^2
// for a profile u(y) = f(|y|) supported in |y| <= support.
double radial_trace_quotient(int n, const std::function<double(double)>& f,
                             const std::function<double(double)>& fprime, double support);

// F(y) = (ybar, y_n + 1) / |y + e_n|^2 - e_n, mapping R^n_+ onto the ball of
// radius 1/2 centred at -e_n/2.
Eigen::VectorXd inversion_map(const Eigen::VectorXd& y);

// max over entries of |J^T J - U_1^{4/(n-2)} Id| / U_1^{4/(n-2)} with J by
// centred differences of step h.
double inversion_conformality_defect(const Eigen::VectorXd& y, double h = 1e-6);

// Quintic bridge: 1 on [0, 4/3], 0 on [5/3, inf), C^2 in between.
double cutoff_eta(double t);

}  // namespace yamabe
