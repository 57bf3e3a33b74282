#include "yamabe/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "yamabe/error.hpp"
#include "yamabe/flow.hpp"
#include "yamabe/io.hpp"
#include "yamabe/locate.hpp"

namespace yamabe {

Point fermi_coordinates(const SurfaceLocator& surface, const BoundaryChart& chart, const Point& x) {
  const SurfacePoint foot = surface.closest(x);
  const Point t = chart.frame.transpose() * (foot.point - chart.origin);
  return {t[0], t[1], foot.distance};
}

ScalarField test_function(const DiscreteOperators& ops, int x0, double epsilon, double rho, const GreensFunction& g,
                          double hbar_inf) {
  const SimplicialMesh& mesh = ops.m();
  constexpr int n = 3;
  if (mesh.dimension() != n) throw Error(ErrorCode::UnsupportedDimension, "test functions are implemented for n = 3");
  if (!(epsilon > 0.0) || !(hbar_inf > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon and hbar_inf must be positive");
  }
  if (2.0 * epsilon > rho) {
    throw Error(ErrorCode::PreconditionRho, "2 eps = " + format_double(2.0 * epsilon) + " exceeds rho");
  }
  const double chart_radius = 0.25 * mesh.diameter();
  if (rho > chart_radius) {
    throw Error(ErrorCode::ChartTooSmall,
                "rho = " + format_double(rho) + " exceeds the chart radius " + format_double(chart_radius));
  }
  if (g.pole != x0) throw Error(ErrorCode::InvalidArgument, "Green's function pole differs from x0");

  const double scale = std::pow(2.0 * (n - 1) / hbar_inf, 0.5 * (n - 2));
  const double g_factor = g.conversion_factor(GreensNormalization::Section3) * std::pow(epsilon, 0.5 * (n - 2));
  const Bubble bubble{n, epsilon, {}, BubbleConvention::Section3};
  const SurfaceLocator surface(mesh);
  const auto& v = mesh.vertices();
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double far = g_factor * g.total.values[ii];
    // The Fermi distance differs from the Euclidean one by O(|x|^2); 2 rho
    // safely encloses the cutoff support 5 rho / 3.
    if ((v[i] - g.chart.origin).norm() > 2.0 * rho) {
      out[ii] = scale * far;
      continue;
    }
    const Point y = static_cast<int>(i) == x0 ? Point::Zero() : fermi_coordinates(surface, g.chart, v[i]);
    const double eta = cutoff_eta(y.norm() / rho);
    const double u = bubble_value(bubble, Eigen::VectorXd(y));
    out[ii] = scale * (eta == 1.0 ? u : eta * u + (1.0 - eta) * far);
  }
  if (!out.allFinite() || out.minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "test function is not positive; the Green's function patch is too coarse");
  }
  return ScalarField{out};
}

Point ball_mobius(const Point& x, const Point& a) {
  const double ax = a.dot(x), x2 = x.squaredNorm(), a2 = a.squaredNorm();
  return ((1.0 + 2.0 * ax + x2) * a + (1.0 - a2) * x) / (1.0 + 2.0 * ax + a2 * x2);
}

double critical_energy(const DiscreteOperators& ops, const ScalarField& u, int n) {
  const ConformalConstants k(n);
  const auto& bv = ops.m().boundary_vertices();
  double crit = 0.0;
  for (std::size_t s = 0; s < bv.size(); ++s) {
    crit += ops.boundary_weights[static_cast<Eigen::Index>(s)] * std::pow(std::abs(u.values[bv[s]]), k.critical);
  }
  return (n - 2.0) / (8.0 * (n - 1)) * energy_numerator(ops, u, n) - (n - 2.0) / (2.0 * (n - 1)) * crit;
}

namespace {

struct PatchSample {
  double y1, y2, value;
};

// Boundary profile A (eps / (eps^2 + |ybar - a|^2))^{(n-2)/2} + offset in
// the parameters (A, log eps, a1, a2, offset).
struct ProfileFit : Eigen::DenseFunctor<double> {
  ProfileFit(const std::vector<PatchSample>& samples, int n)
      : Eigen::DenseFunctor<double>(5, static_cast<int>(samples.size())), samples_(&samples), k_(0.5 * (n - 2)) {}

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    const double eps = std::exp(p[1]);
    for (std::size_t i = 0; i < samples_->size(); ++i) {
      const auto& s = (*samples_)[i];
      const double d2 = (s.y1 - p[2]) * (s.y1 - p[2]) + (s.y2 - p[3]) * (s.y2 - p[3]);
      r[static_cast<Eigen::Index>(i)] = p[0] * std::pow(eps / (eps * eps + d2), k_) + p[4] - s.value;
    }
    return 0;
  }

  const std::vector<PatchSample>* samples_;
  double k_;
};

struct Candidate {
  int slot = -1;
  double radius = std::numeric_limits<double>::infinity();
};

}  // namespace

Decomposition struwe_decompose(const DiscreteOperators& ops, const ScalarField& u, int n, double beta_star) {
  const SimplicialMesh& mesh = ops.m();
  if (n != mesh.dimension()) throw Error(ErrorCode::UnsupportedDimension, "n differs from the mesh dimension");
  if (u.values.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw Error(ErrorCode::InvalidArgument, "u must be a vertex field");
  }
  if (u.values.minCoeff() < 0.0) throw Error(ErrorCode::InvalidArgument, "u must be nonnegative");
  const ConformalConstants k(n);
  const auto& bv = mesh.boundary_vertices();
  const auto& v = mesh.vertices();
  const double search_radius = 0.05 * mesh.diameter();
  constexpr int kMaxBubbles = 16;
  constexpr int kCandidates = 32;

  Decomposition out;
  out.threshold = (n - 1.0) * beta_star / ((n - 2.0) * (n - 2.0));
  out.energy = critical_energy(ops, u, n);
  Eigen::VectorXd current = u.values;
  double current_energy = out.energy;
  std::vector<char> excluded(bv.size(), 0);
  const SurfaceLocator surface(mesh);

  std::vector<double> local_edge(mesh.num_vertices(), 0.0);
  for (const auto& e : mesh.edges()) {
    const double l = (v[static_cast<std::size_t>(e[0])] - v[static_cast<std::size_t>(e[1])]).norm();
    local_edge[static_cast<std::size_t>(e[0])] = std::max(local_edge[static_cast<std::size_t>(e[0])], l);
    local_edge[static_cast<std::size_t>(e[1])] = std::max(local_edge[static_cast<std::size_t>(e[1])], l);
  }

  for (int iter = 0; iter < kMaxBubbles; ++iter) {
    std::vector<double> mass(bv.size());
    for (std::size_t s = 0; s < bv.size(); ++s) {
      mass[s] = ops.boundary_weights[static_cast<Eigen::Index>(s)] * std::pow(current[bv[s]], k.critical);
    }
    std::vector<int> order(bv.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return current[bv[static_cast<std::size_t>(a)]] > current[bv[static_cast<std::size_t>(b)]];
    });
    Candidate best;
    int considered = 0;
    for (int s : order) {
      if (considered == kCandidates) break;
      if (excluded[static_cast<std::size_t>(s)] || current[bv[static_cast<std::size_t>(s)]] <= 0.0) continue;
      ++considered;
      const auto dist = boundary_distances(ops, s, search_radius);
      std::vector<int> reached;
      for (std::size_t b = 0; b < dist.size(); ++b) {
        if (std::isfinite(dist[b])) reached.push_back(static_cast<int>(b));
      }
      std::sort(reached.begin(), reached.end(), [&](int a, int b) {
        return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
      });
      double acc = 0.0;
      for (int b : reached) {
        acc += mass[static_cast<std::size_t>(b)];
        if (acc >= out.threshold) {
          const double r = dist[static_cast<std::size_t>(b)];
          if (r < best.radius) best = {s, r};
          break;
        }
      }
    }
    if (best.slot < 0) break;

    const int seed = bv[static_cast<std::size_t>(best.slot)];
    const BoundaryChart chart = boundary_chart(mesh, seed);
    const double patch_radius = std::max(3.0 * best.radius, 3.0 * local_edge[static_cast<std::size_t>(seed)]);
    const auto patch_dist = boundary_distances(ops, best.slot, patch_radius);
    std::vector<PatchSample> samples;
    std::vector<int> patch_slots;
    for (std::size_t b = 0; b < patch_dist.size(); ++b) {
      if (!std::isfinite(patch_dist[b])) continue;
      const Point y = chart.to_chart(v[static_cast<std::size_t>(bv[b])]);
      samples.push_back({y[0], y[1], current[bv[b]]});
      patch_slots.push_back(static_cast<int>(b));
    }

    Eigen::VectorXd p(5);
    const double eps0 = std::max(best.radius, 0.5 * local_edge[static_cast<std::size_t>(seed)]);
    p << current[seed] * std::pow(eps0, 0.5 * (n - 2)), std::log(eps0), 0.0, 0.0, 0.0;
    bool ok = samples.size() >= 6;
    if (ok) {
      ProfileFit functor(samples, n);
      Eigen::NumericalDiff<ProfileFit> numdiff(functor);
      Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ProfileFit>> lm(numdiff);
      lm.setMaxfev(2000);
      const auto status = lm.minimize(p);
      ok = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
           status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation && p.allFinite() &&
           std::exp(p[1]) < mesh.diameter() && std::hypot(p[2], p[3]) < patch_radius;
    }
    if (!ok) {
      out.skipped.push_back(seed);
      for (int b : patch_slots) excluded[static_cast<std::size_t>(b)] = 1;
      continue;
    }
    ExtractedBubble eb;
    eb.vertex = seed;
    eb.amplitude = p[0];
    eb.epsilon = std::exp(p[1]);
    if (std::abs(eb.amplitude - 1.0) > 0.3) break;

    // Cutoff as wide as the far field allows.
    const Point foot = chart.from_chart(Point(p[2], p[3], 0.0));
    eb.center = surface.closest(foot).point;
    double d_far = std::numeric_limits<double>::infinity();
    for (int f : mesh.farfield_vertices()) d_far = std::min(d_far, (v[static_cast<std::size_t>(f)] - eb.center).norm());
    const double support = std::min(0.8 * d_far, 0.25 * mesh.diameter());
    eb.cutoff_rho = 0.6 * support;

    const Bubble bubble{n, eb.epsilon, {}, BubbleConvention::Section3};
    BoundaryChart centred = chart;
    centred.origin = eb.center;
    Eigen::VectorXd next = current;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if ((v[i] - eb.center).norm() > 1.2 * support) continue;
      const Point y = fermi_coordinates(surface, centred, v[i]);
      const double eta = cutoff_eta(y.norm() / eb.cutoff_rho);
      if (eta == 0.0) continue;
      next[static_cast<Eigen::Index>(i)] -= eb.amplitude * eta * bubble_value(bubble, Eigen::VectorXd(y));
    }
    next = next.cwiseMax(0.0);
    const double next_energy = critical_energy(ops, ScalarField{next}, n);
    eb.energy = current_energy - next_energy;
    if (eb.energy <= 0.5 * beta_star) break;
    out.bubbles.push_back(eb);
    current = next;
    current_energy = next_energy;
  }

  out.u0 = ScalarField{current};
  out.energy_u0 = current_energy;
  out.residual_energy = 0.5 * current.dot(ops.conformal_stiffness * current);
  const auto m = static_cast<Eigen::Index>(out.bubbles.size());
  out.separation = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      const auto& a = out.bubbles[static_cast<std::size_t>(i)];
      const auto& b = out.bubbles[static_cast<std::size_t>(j)];
      const double ri = 1.0 / a.epsilon, rj = 1.0 / b.epsilon;
      out.separation(i, j) = ri / rj + rj / ri + ri * rj * (a.center - b.center).squaredNorm();
    }
  }
  return out;
}

std::string decomposition_to_json(const Decomposition& d) {
  std::ostringstream os;
  os << "{\"m\": " << d.bubbles.size() << ", \"bubbles\": [";
  for (std::size_t i = 0; i < d.bubbles.size(); ++i) {
    const auto& b = d.bubbles[i];
    os << (i ? ", " : "") << "{\"vertex\": " << b.vertex << ", \"epsilon\": " << format_double(b.epsilon)
       << ", \"center\": [" << format_double(b.center[0]) << ", " << format_double(b.center[1]) << ", "
       << format_double(b.center[2]) << "], \"energy\": " << format_double(b.energy)
       << ", \"amplitude\": " << format_double(b.amplitude) << "}";
  }
  os << "], \"residual_energy\": " << format_double(d.residual_energy) << ", \"energy\": " << format_double(d.energy)
     << ", \"energy_u0\": " << format_double(d.energy_u0) << ", \"threshold\": " << format_double(d.threshold)
     << ", \"skipped\": [";
  for (std::size_t i = 0; i < d.skipped.size(); ++i) os << (i ? ", " : "") << d.skipped[i];
  os << "], \"separation\": [";
  for (Eigen::Index i = 0; i < d.separation.rows(); ++i) {
    os << (i ? ", " : "") << "[";
    for (Eigen::Index j = 0; j < d.separation.cols(); ++j) os << (j ? ", " : "") << format_double(d.separation(i, j));
    os << "]";
  }
  os << "]}";
  return os.str();
}

}  // namespace yamabe
