#include "yamabe/greens.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "yamabe/bubbles.hpp"
#include "yamabe/error.hpp"
#include "yamabe/io.hpp"

namespace yamabe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> hop_neighbourhood(const SimplicialMesh& mesh, int source, int hops) {
  std::vector<std::vector<int>> adj(mesh.num_vertices());
  for (const auto& e : mesh.edges()) {
    adj[static_cast<std::size_t>(e[0])].push_back(e[1]);
    adj[static_cast<std::size_t>(e[1])].push_back(e[0]);
  }
  std::vector<int> depth(mesh.num_vertices(), -1);
  std::deque<int> queue{source};
  depth[static_cast<std::size_t>(source)] = 0;
  std::vector<int> out;
  while (!queue.empty()) {
    const int a = queue.front();
    queue.pop_front();
    out.push_back(a);
    if (depth[static_cast<std::size_t>(a)] == hops) continue;
    for (int b : adj[static_cast<std::size_t>(a)]) {
      if (depth[static_cast<std::size_t>(b)] < 0) {
        depth[static_cast<std::size_t>(b)] = depth[static_cast<std::size_t>(a)] + 1;
        queue.push_back(b);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

BoundaryChart boundary_chart(const SimplicialMesh& mesh, int vertex) {
  if (vertex < 0 || static_cast<std::size_t>(vertex) >= mesh.num_vertices() || !mesh.is_boundary_vertex(vertex)) {
    throw Error(ErrorCode::PoleNotOnBoundary, "vertex " + std::to_string(vertex) + " is not on the boundary");
  }
  const Point nu = -mesh.boundary_normal(mesh.boundary_slot(vertex)).normalized();
  int k = 0;
  for (int j = 1; j < 3; ++j) {
    if (std::abs(nu[j]) < std::abs(nu[k])) k = j;
  }
  const Point e = Point::Unit(k);
  const Point t1 = (e - e.dot(nu) * nu).normalized();
  const Point t2 = nu.cross(t1);
  BoundaryChart chart;
  chart.origin = mesh.vertices()[static_cast<std::size_t>(vertex)];
  chart.frame.col(0) = t1;
  chart.frame.col(1) = t2;
  chart.frame.col(2) = nu;
  return chart;
}

SparseMatrix greens_operator(const DiscreteOperators& ops) {
  const SimplicialMesh& mesh = ops.m();
  const ConformalConstants k(mesh.dimension());
  SparseMatrix a = k.laplacian * ops.conformal_stiffness;
  const auto& bv = mesh.boundary_vertices();
  for (std::size_t s = 0; s < bv.size(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    a.coeffRef(bv[s], bv[s]) += 2.0 * ops.boundary_weights[si] * ops.mean_curvature.values[si];
  }
  return a;
}

double GreensFunction::parametrix_at(const Point& x) const {
  return std::pow(metric_scale * (x - chart.origin).norm(), 2.0 - n);
}

Point GreensFunction::parametrix_gradient(const Point& x) const {
  const Point d = x - chart.origin;
  return (2.0 - n) * parametrix_at(x) / d.squaredNorm() * d;
}

double GreensFunction::value(const Point& x) const {
  const CellHit hit = locator->locate(x);
  return parametrix_at(x) + interpolate(*mesh, hit, correction.values);
}

Point GreensFunction::gradient(const Point& x) const {
  const CellHit hit = locator->locate(x);
  return parametrix_gradient(x) + cell_gradient(*mesh, hit.cell, correction.values);
}

bool GreensFunction::in_patch(int vertex) const { return std::binary_search(patch.begin(), patch.end(), vertex); }

double GreensFunction::conversion_factor(GreensNormalization target) const {
  if (target == normalization) return 1.0;
  const double appendix_b = 1.0 / ((n - 2.0) * sphere_area(n - 1));
  return target == GreensNormalization::AppendixB ? appendix_b : 1.0 / appendix_b;
}

GreensFunction greens_function(const DiscreteOperators& ops, int x0, int n) {
  const SimplicialMesh& mesh = ops.m();
  if (n != mesh.dimension()) throw Error(ErrorCode::UnsupportedDimension, "n differs from the mesh dimension");
  GreensFunction g;
  g.chart = boundary_chart(mesh, x0);
  g.mesh = ops.mesh;
  g.locator = std::make_shared<PointLocator>(ops.mesh);
  g.pole = x0;
  g.n = n;
  if (!mesh.metric().is_euclidean()) g.metric_scale = std::pow((*mesh.metric().conformal_factor)[x0], 2.0 / (n - 2));

  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  const auto& v = mesh.vertices();
  Eigen::VectorXd p(nv), sr(nv);
  for (Eigen::Index i = 0; i < nv; ++i) {
    sr[i] = g.metric_scale * (v[static_cast<std::size_t>(i)] - g.chart.origin).norm();
    p[i] = i == x0 ? kInf : std::pow(sr[i], 2.0 - n);
  }

  g.patch = hop_neighbourhood(mesh, x0, 2);
  for (int i : g.patch) g.patch_radius = std::max(g.patch_radius, (v[static_cast<std::size_t>(i)] - g.chart.origin).norm());
  std::vector<int> fixed = g.patch;
  for (int i : mesh.farfield_vertices()) {
    if (!g.in_patch(i)) fixed.push_back(i);
  }
  const SparseMatrix a = greens_operator(ops);
  const DirichletProblem problem(a, fixed);

  // G0: patch = P, far field = P.  G1: patch = P (s r), far field = 0.
  Eigen::VectorXd d0(static_cast<Eigen::Index>(fixed.size())), d1(static_cast<Eigen::Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    const int i = fixed[k];
    const bool patch = k < g.patch.size();
    const auto ks = static_cast<Eigen::Index>(k);
    d0[ks] = i == x0 ? 0.0 : p[i];
    d1[ks] = !patch || i == x0 ? 0.0 : std::pow(sr[i], 3.0 - n);
  }
  const Eigen::VectorXd g0 = problem.solve(d0);
  const Eigen::VectorXd g1 = problem.solve(d1);

  // Radial power fit on the annulus just outside the patch.
  double num = 0.0, den = 0.0;
  for (int i : problem.free()) {
    const double r = (v[static_cast<std::size_t>(i)] - g.chart.origin).norm();
    if (r <= g.patch_radius || r > 2.0 * g.patch_radius) continue;
    const double av = (g0[i] - p[i]) / p[i];
    const double bv = g1[i] / p[i] - sr[i];
    num += av * bv;
    den += bv * bv;
  }
  g.extrapolation_c = den > 0.0 ? -num / den : 0.0;
  const double c = g.extrapolation_c;

  Eigen::VectorXd total = g0 + c * g1;
  for (int i : g.patch) total[i] = p[i] * (1.0 + c * sr[i]);
  total[x0] = kInf;
  g.total = ScalarField{total};
  g.parametrix = ScalarField{p};
  Eigen::VectorXd w = total - p;
  w[x0] = c * std::pow(g.metric_scale, 3.0 - n) * (n == 3 ? 1.0 : 0.0);
  g.correction = ScalarField{w};

  Eigen::VectorXd finite = total;
  finite[x0] = 0.0;
  const Eigen::VectorXd r_all = a * finite;
  Eigen::VectorXd fixed_only = finite;
  for (int i : problem.free()) fixed_only[i] = 0.0;
  const Eigen::VectorXd rhs_all = a * fixed_only;
  double rn = 0.0, bn = 0.0;
  for (int i : problem.free()) {
    rn += r_all[i] * r_all[i];
    bn += rhs_all[i] * rhs_all[i];
  }
  g.relative_residual = bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
  return g;
}

std::string greens_to_json(const GreensFunction& g, GreensNormalization normalization) {
  const double factor = g.conversion_factor(normalization);
  std::ostringstream os;
  os << "{\"pole\": " << g.pole << ", \"values\": [";
  for (Eigen::Index i = 0; i < g.total.values.size(); ++i) {
    if (i) os << ", ";
    const double x = g.total.values[i];
    if (std::isfinite(x)) {
      os << format_double(factor * x);
    } else {
      os << "null";
    }
  }
  os << "], \"normalization\": \""
     << (normalization == GreensNormalization::Section3 ? "section3" : "appendixB") << "\"}";
  return os.str();
}

AsymptoticsProfile greens_asymptotics_check(const GreensFunction& g, const std::vector<double>& radii) {
  AsymptoticsProfile prof;
  const double chart_radius = 0.25 * g.mesh->diameter();
  for (double r : radii) {
    if (!(r > 0.0) || r > chart_radius) {
      prof.ok = false;
      prof.warning = "radius " + format_double(r) + " lies outside the chart (radius " + format_double(chart_radius) + ")";
      return prof;
    }
  }
  const auto& v = g.mesh->vertices();
  for (double r : radii) {
    double dev = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const int vi = static_cast<int>(i);
      if (g.in_patch(vi)) continue;
      const double d = (v[i] - g.chart.origin).norm();
      if (d < r / std::sqrt(2.0) || d > r * std::sqrt(2.0)) continue;
      dev = std::max(dev, std::abs(g.total.values[vi] - std::pow(g.metric_scale * d, 2.0 - g.n)));
    }
    if (dev < 0.0) continue;
    prof.radii.push_back(r);
    prof.deviation.push_back(dev);
    prof.constant = std::max(prof.constant, dev);
  }
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < prof.radii.size(); ++k) {
    if (prof.deviation[k] > 0.0) {
      lx.push_back(std::log(prof.radii[k]));
      ly.push_back(std::log(prof.deviation[k]));
    }
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
      sxy += (lx[k] - mx) * (ly[k] - my);
      sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    prof.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  if (prof.radii.empty()) {
    prof.ok = false;
    prof.warning = "no off-patch vertices near the requested radii";
  }
  return prof;
}

GreensEvaluator flat_greens_evaluator(double chart_radius) {
  GreensEvaluator e;
  e.value = [](const Point& y) { return 1.0 / y.norm(); };
  e.gradient = [](const Point& y) { return Point(-y / std::pow(y.norm(), 3)); };
  e.chart_radius = chart_radius;
  return e;
}

GreensEvaluator mesh_greens_evaluator(const GreensFunction& g) {
  GreensEvaluator e;
  e.value = [&g](const Point& y) { return g.value(g.chart.from_chart(y)); };
  e.gradient = [&g](const Point& y) { return Point(g.chart.frame.transpose() * g.gradient(g.chart.from_chart(y))); };
  e.chart_radius = 0.25 * g.mesh->diameter();
  return e;
}

namespace {

// d_c h_ab by fourth-order centred differences.
std::array<Eigen::Matrix3d, 3> metric_derivatives(const MetricPerturbation& h, const Point& y, double step) {
  std::array<Eigen::Matrix3d, 3> d;
  for (int c = 0; c < 3; ++c) {
    const Point e = step * Point::Unit(c);
    d[static_cast<std::size_t>(c)] = (8.0 * (h(y + e) - h(y - e)) - (h(y + 2.0 * e) - h(y - 2.0 * e))) / (12.0 * step);
  }
  return d;
}

template <class F>
double hemisphere_gauss(double radius, const F& integrand) {
  using Rule = boost::math::quadrature::gauss<double, 40>;
  constexpr int kPhi = 128;
  double total = 0.0;
  for (int j = 0; j < kPhi; ++j) {
    const double phi = 2.0 * M_PI * j / kPhi;
    total += Rule::integrate(
        [&](double theta) {
          const Point y(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                        radius * std::cos(theta));
          return integrand(y) * radius * radius * std::sin(theta);
        },
        0.0, 0.5 * M_PI);
  }
  return total * 2.0 * M_PI / kPhi;
}

template <class F>
double hemisphere_kronrod(double radius, const F& integrand) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  double err = 0.0;
  const double v = Rule::integrate(
      [&](double theta) {
        double inner_err = 0.0;
        const double inner = Rule::integrate(
            [&](double phi) {
              const Point y(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                            radius * std::cos(theta));
              return integrand(y);
            },
            0.0, 2.0 * M_PI, 6, 1e-10, &inner_err);
        return inner * radius * radius * std::sin(theta);
      },
      0.0, 0.5 * M_PI, 6, 1e-10, &err);
  if (!std::isfinite(v) || err > 1e-8 * std::max(std::abs(v), radius * radius)) {
    throw Error(ErrorCode::QuadratureNotConverged, "hemisphere quadrature error estimate " + format_double(err));
  }
  return v;
}

}  // namespace

double flux_integral(const GreensEvaluator& g, const MetricPerturbation& h, double rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be positive");
  if (rho > g.chart_radius) {
    throw Error(ErrorCode::ChartTooSmall,
                "rho = " + format_double(rho) + " exceeds the chart radius " + format_double(g.chart_radius));
  }
  constexpr int n = 3;
  const ConformalConstants k(n);
  const double green = hemisphere_gauss(rho, [&](const Point& y) {
    const double r = y.norm();
    const double dr_g = g.gradient(y).dot(y) / r;
    return std::pow(r, 2.0 - n) * dr_g - (2.0 - n) * std::pow(r, 1.0 - n) * g.value(y);
  });
  double metric = 0.0;
  if (h) {
    metric = hemisphere_gauss(rho, [&](const Point& y) {
      const double r = y.norm();
      const auto d = metric_derivatives(h, y, 1e-3 * rho);
      const Eigen::Matrix3d hy = h(y);
      double s = 0.0;
      for (int a = 0; a < 3; ++a) {
        double div = 0.0;
        for (int b = 0; b < 3; ++b) div += d[static_cast<std::size_t>(b)](a, b);
        s += (r * r * div - 2.0 * n * hy.row(a).dot(y)) * y[a] / r;
      }
      return std::pow(r, 2.0 - 2.0 * n) * s;
    });
  }
  return k.laplacian * green - metric;
}

double partial_mass(const MetricPerturbation& h, double radius, MassQuadrature rule) {
  if (!h) return 0.0;
  const double step = 1e-3 * radius;
  auto hemi = [&](const Point& y) {
    const auto d = metric_derivatives(h, y, step);
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      double div = 0.0;
      for (int b = 0; b < 3; ++b) div += d[static_cast<std::size_t>(b)](a, b);
      s += (div - d[static_cast<std::size_t>(a)].trace()) * y[a] / radius;
    }
    return s;
  };
  auto equator = [&](double phi) {
    const Point y(radius * std::cos(phi), radius * std::sin(phi), 0.0);
    const Eigen::Matrix3d hy = h(y);
    return (hy(2, 0) * y[0] + hy(2, 1) * y[1]) / radius * radius;
  };
  if (rule == MassQuadrature::GaussProduct) {
    constexpr int kPhi = 256;
    double eq = 0.0;
    for (int j = 0; j < kPhi; ++j) eq += equator(2.0 * M_PI * j / kPhi);
    return hemisphere_gauss(radius, hemi) + eq * 2.0 * M_PI / kPhi;
  }
  double err = 0.0;
  const double eq = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(equator, 0.0, 2.0 * M_PI, 6,
                                                                                   1e-10, &err);
  if (err > 1e-8 * std::max(std::abs(eq), radius)) {
    throw Error(ErrorCode::QuadratureNotConverged, "equatorial quadrature error estimate " + format_double(err));
  }
  return hemisphere_kronrod(radius, hemi) + eq;
}

std::pair<double, double> richardson(const std::vector<double>& radii, const std::vector<double>& values) {
  const std::size_t m = values.size();
  if (m == 0) return {0.0, 0.0};
  if (m == 1) return {values[0], 0.0};
  const double v3 = values[m - 1], v2 = values[m - 2];
  const double r3 = radii[m - 1], r2 = radii[m - 2];
  const double scale = std::max({std::abs(v3), std::abs(v2), 1e-300});
  if (std::abs(v3 - v2) <= 1e-13 * scale) return {v3, 0.0};
  double q = 1.0;
  if (m >= 3) {
    const double v1 = values[m - 3], r1 = radii[m - 3];
    const double ratio = (v2 - v1) / (v3 - v2);
    auto f = [&](double qq) {
      return (std::pow(r1, -qq) - std::pow(r2, -qq)) / (std::pow(r2, -qq) - std::pow(r3, -qq)) - ratio;
    };
    double lo = 1e-3, hi = 20.0;
    if (ratio > 0.0 && f(lo) * f(hi) < 0.0) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(lo) * f(mid) <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      q = 0.5 * (lo + hi);
    }
  }
  const double limit = v3 + (v3 - v2) * std::pow(r3, -q) / (std::pow(r2, -q) - std::pow(r3, -q));
  return {limit, q};
}

MassReport mass(const MassSpec& spec, int n, MassQuadrature rule) {
  if (n != 3) throw Error(ErrorCode::UnsupportedDimension, "mass is implemented for n = 3");
  if (!(spec.decay_order > (n - 2) / 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "decay order must exceed (n-2)/2 = " + format_double((n - 2) / 2.0));
  }
  if (spec.radii.empty()) throw Error(ErrorCode::InvalidArgument, "at least one radius is required");
  for (std::size_t k = 0; k < spec.radii.size(); ++k) {
    if (!(spec.radii[k] > 0.0) || (k > 0 && !(spec.radii[k] > spec.radii[k - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "radii must be positive and increasing");
    }
  }
  MassReport rep;
  rep.radii = spec.radii;
  for (double r : spec.radii) rep.partial.push_back(partial_mass(spec.h, r, rule));
  std::tie(rep.extrapolated, rep.order_fit) = richardson(rep.radii, rep.partial);
  return rep;
}

std::string mass_to_json(const MassReport& report) {
  std::ostringstream os;
  auto list = [&](const std::vector<double>& xs) {
    os << "[";
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? ", " : "") << format_double(xs[i]);
    os << "]";
  };
  os << "{\"radii\": ";
  list(report.radii);
  os << ", \"partial\": ";
  list(report.partial);
  os << ", \"extrapolated\": " << format_double(report.extrapolated)
     << ", \"order_fit\": " << format_double(report.order_fit) << "}";
  return os.str();
}

}  // namespace yamabe
