#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "yamabe/conformal.hpp"
#include "yamabe/locate.hpp"

namespace yamabe {

// First-order boundary chart at a boundary vertex: y = frame^T (x - origin),
// with the third frame column the inward unit normal.
struct BoundaryChart {
  Point origin = Point::Zero();
  Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();

  Point to_chart(const Point& x) const { return frame.transpose() * (x - origin); }
  Point from_chart(const Point& y) const { return origin + frame * y; }
};

BoundaryChart boundary_chart(const SimplicialMesh& mesh, int vertex);

// section3: lim |y|^{n-2} G = 1.  appendixB: leading coefficient 1/((n-2) sigma_{n-1}).
enum class GreensNormalization { Section3, AppendixB };

struct GreensFunction {
  std::shared_ptr<const SimplicialMesh> mesh;
  std::shared_ptr<const PointLocator> locator;
  int pole = -1;
  int n = 3;
  BoundaryChart chart;
  double metric_scale = 1.0;  // phi(x0)^{2/(n-2)}; the parametrix is (scale |x - x0|)^{2-n}
  ScalarField parametrix;     // +inf at the pole
  ScalarField correction;     // w = total - parametrix (finite everywhere)
  ScalarField total;          // +inf at the pole
  std::vector<int> patch;     // Dirichlet pole patch
  double patch_radius = 0.0;
  double extrapolation_c = 0.0;  // patch data P (1 + c |y|)
  double relative_residual = 0.0;  // free rows of the discrete equation
  GreensNormalization normalization = GreensNormalization::Section3;

  double parametrix_at(const Point& x) const;
  Point parametrix_gradient(const Point& x) const;
  // P + interpolated w at an arbitrary point, and its gradient.
  double value(const Point& x) const;
  Point gradient(const Point& x) const;
  bool in_patch(int vertex) const;
  // Multiplier taking the stored normalization to `target`.
  double conversion_factor(GreensNormalization target) const;
};

// Conformal Green's function with pole at boundary vertex x0:
//   L_{g0} G = 0 in M \ {x0},  d_eta G - (n-2)/(2(n-1)) H_{g0} G = 0 on dM \ {x0},
// split as G = P + w. The vertices within two edge hops of x0 are
// prescribed as P (1 + c|y|) with c fitted against the solution on the
// surrounding annulus; far-field faces carry P.
GreensFunction greens_function(const DiscreteOperators& ops, int x0, int n);

// Weak operator c K + R M + 2 H m of the Green's function problem.
SparseMatrix greens_operator(const DiscreteOperators& ops);

std::string greens_to_json(const GreensFunction& g, GreensNormalization normalization);

struct AsymptoticsProfile {
  std::vector<double> radii;
  std::vector<double> deviation;  // max |G - |y|^{2-n}| over vertices with |y| near r
  double slope = 0.0;             // log-log slope of deviation vs radius
  double constant = 0.0;          // max deviation
  bool ok = true;
  std::string warning;
};

AsymptoticsProfile greens_asymptotics_check(const GreensFunction& g, const std::vector<double>& radii);

// Value and gradient of a Green's function in chart coordinates.
struct GreensEvaluator {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  double chart_radius = 0.0;
};

GreensEvaluator flat_greens_evaluator(double chart_radius);
GreensEvaluator mesh_greens_evaluator(const GreensFunction& g);

// h_ab(x) in chart coordinates.
using MetricPerturbation = std::function<Eigen::Matrix3d(const Point&)>;

// Flux integral over the half sphere |x| = rho, x_n > 0 (n = 3):
//   4(n-1)/(n-2) int (|x|^{2-n} d_a G - d_a|x|^{2-n} G) x_a/|x|
//   - int |x|^{2-2n} (|x|^2 d_b h_ab - 2n x_b h_ab) x_a/|x|.
double flux_integral(const GreensEvaluator& g, const MetricPerturbation& h, double rho);

enum class MassQuadrature { GaussProduct, AdaptiveKronrod };

struct MassSpec {
  MetricPerturbation h;  // g_ab - delta_ab on the half-space chart
  double decay_order = 1.0;
  std::vector<double> radii;
};

struct MassReport {
  std::vector<double> radii;
  std::vector<double> partial;
  double extrapolated = 0.0;
  double order_fit = 0.0;  // fitted exponent q of m(R) = m + C R^{-q}; 0 if undetermined
};

// Hemisphere term plus the equatorial term sum_i int g(d_n, d_i) y_i/|y|
// with the outward orientation y_i/|y|. n = 3.
MassReport mass(const MassSpec& spec, int n, MassQuadrature rule = MassQuadrature::GaussProduct);
double partial_mass(const MetricPerturbation& h, double radius, MassQuadrature rule);

std::string mass_to_json(const MassReport& report);

// Richardson extrapolation of m(R) = m + C R^{-q} from the last three
// samples (q fitted) or the last two (q = 1).
std::pair<double, double> richardson(const std::vector<double>& radii, const std::vector<double>& values);

}  // namespace yamabe
