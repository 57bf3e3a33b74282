#pragma once

#include <string>
#include <vector>

#include "yamabe/bubbles.hpp"
#include "yamabe/conformal.hpp"
#include "yamabe/greens.hpp"

namespace yamabe {

// Approximate Fermi coordinates about a boundary chart: y_n is the distance
// to dM, ybar the tangential chart coordinates of the closest point on dM.
Point fermi_coordinates(const SurfaceLocator& surface, const BoundaryChart& chart, const Point& x);

// n = 3 test function
//   (2(n-1)/hbar_inf)^{(n-2)/2} [eta_rho U_eps + (1 - eta_rho) eps^{(n-2)/2} G]
// with G in the |y|^{2-n} normalization. Throws PreconditionRho (2 eps > rho)
// and ChartTooSmall (rho > diam/4).
ScalarField test_function(const DiscreteOperators& ops, int x0, double epsilon, double rho, const GreensFunction& g,
                          double hbar_inf);

// Image of the unit ball under the Mobius automorphism sending 0 to a; near
// a/|a| the mesh is refined by (1 + |a|)/(1 - |a|).
Point ball_mobius(const Point& x, const Point& a);

// Discrete I(u) = 1/2 u^T K_c u + (n-2)/(4(n-1)) int H0 u^2 - (n-2)/(2(n-1)) int |u|^q
// (bubble normalization: one section3 bubble on the half-space carries beta*).
double critical_energy(const DiscreteOperators& ops, const ScalarField& u, int n);

struct ExtractedBubble {
  int vertex = -1;         // boundary vertex that seeded the fit
  Point center;            // fitted pole foot on dM
  double epsilon = 0.0;
  double amplitude = 1.0;  // fitted multiple of U_eps
  double energy = 0.0;     // drop of I caused by the subtraction
  double cutoff_rho = 0.0;
};

struct Decomposition {
  ScalarField u0;
  std::vector<ExtractedBubble> bubbles;
  std::vector<int> skipped;  // seed vertices whose fit diverged
  double residual_energy = 0.0;  // 1/2 u0^T K_c u0
  double energy = 0.0;           // I(u)
  double energy_u0 = 0.0;        // I(u0)
  double threshold = 0.0;        // boundary mass locating a candidate
  // R_i/R_j + R_j/R_i + R_i R_j d(x_i, x_j)^2 with R = 1/eps.
  Eigen::MatrixXd separation;
};

// Greedy extraction: seed at the boundary vertex whose disc reaches half a
// bubble's critical boundary mass at the smallest radius, fit
// (A, eps, a, offset) on a patch of three concentration radii, subtract the
// cut-off bubble, and repeat while the removed energy exceeds beta*/2.
Decomposition struwe_decompose(const DiscreteOperators& ops, const ScalarField& u, int n, double beta_star);

std::string decomposition_to_json(const Decomposition& d);

}  // namespace yamabe
