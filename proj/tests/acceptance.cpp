// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "yamabe/bubbles.hpp"
#include "yamabe/conformal.hpp"
#include "yamabe/decomposition.hpp"
#include "yamabe/flow.hpp"
#include "yamabe/greens.hpp"
#include "yamabe/io.hpp"
#include "yamabe/linalg.hpp"

using namespace yamabe;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int id, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

void criterion1() {
  Timer t;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(-3.0, 3.0), h(1e-3, 3.0);
  double worst = 0.0;
  for (int n : {3, 4, 5}) {
    for (auto conv : {BubbleConvention::Section3, BubbleConvention::AppendixC}) {
      std::vector<Eigen::VectorXd> pts;
      for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd y(n);
        for (int k = 0; k < n - 1; ++k) y[k] = c(rng);
        y[n - 1] = i % 2 ? 0.0 : h(rng);
        pts.push_back(y);
      }
      const auto r = verify_bubble_pde(Bubble{n, n == 5 ? 0.3 : 1.0, Eigen::VectorXd::Zero(n - 1), conv}, pts);
      worst = std::max({worst, r.interior, r.boundary});
    }
  }
  const double s = t.seconds();
  report(1, worst <= 1e-9 && s < 1.0, fmt("max PDE residual %.2e (n=3,4,5, both conventions), %.3f s", worst, s));
}

void criterion2() {
  Timer t;
  const double beta = bubble_energy(3);
  const double quad = bubble_energy_quadrature(Bubble{3, 1.0, {}, BubbleConvention::Section3}).energy;
  const double q1 = qball(3, 0.5), q2 = qball(3, 1.0), q3 = qball(3, 2.0);
  const double spread = (std::max({q1, q2, q3}) - std::min({q1, q2, q3})) / q2;
  const double closed = std::abs(beta - M_PI / 4), rel = std::abs(quad - beta) / beta;
  const double s = t.seconds();
  report(2, closed <= 1e-10 && rel <= 1e-4 && spread <= 1e-8 && s < 10.0,
         fmt("|beta*-pi/4| = %.1e, quadrature rel err %.1e, qball spread %.1e (qball = %.10f), %.2f s", closed, rel,
             spread, q2, s));
}

void criteria3and4() {
  Timer t;
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 2));
  const DiscreteOperators ops = assemble(mesh);
  FlowConfig cfg;
  cfg.max_steps = 10000;
  cfg.convergence_tol = 1e-3;
  const BoundaryYamabeFlow flow(ops, cfg);
  FlowState state = flow.init(sample(*mesh, [](const Point& x) { return 1.0 + 0.2 * std::sin(x[0]); }));
  const TrajectoryRecord rec = flow.run(state);
  const double s = t.seconds();
  const auto& rows = rec.rows;
  const double h = mesh->mesh_size();
  const double hbound = std::min(rows.front().hmin, 0.0) - 10.0 * h;
  bool mono = true, area = true, minh = true, rres = true;
  double worst_area = 0.0, worst_r = 0.0, worst_rise = 0.0, lowest_h = rows.front().hmin, best_dev = rows.front().dev_l2;
  std::size_t dissip_ok = 0, steps = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    worst_area = std::max(worst_area, std::abs(rows[k].area - 1.0));
    worst_r = std::max(worst_r, rows[k].r_residual);
    lowest_h = std::min(lowest_h, rows[k].hmin);
    best_dev = std::min(best_dev, rows[k].dev_l2);
    if (k == 0) continue;
    const double rise = (rows[k].hbar - rows[k - 1].hbar) / std::abs(rows[k - 1].hbar);
    worst_rise = std::max(worst_rise, rise);
    if (rise > 1e-8) mono = false;
    const double d = (3 - 2) * rows[k - 1].dev_l2 * rows[k - 1].dev_l2;
    const double lhs = std::abs((rows[k].hbar - rows[k - 1].hbar) / rows[k].dt + d);
    ++steps;
    if (lhs <= 0.1 * d + 1e-8) ++dissip_ok;
  }
  area = worst_area <= 1e-12;
  rres = worst_r <= 1e-8;
  minh = lowest_h >= hbound;
  const bool conv = rec.status == FlowStatus::Converged;
  report(3, mono && area && minh && rres && conv && s < 300.0,
         fmt("steps %zu, status %s, min ||H-Hbar||_L2 %.3e (final %.3e, target 1e-3); max Hbar rise %.1e, "
             "area err %.1e, min H %.3f >= %.3f, R_residual %.1e, %.1f s",
             rows.size() - 1, conv ? "converged" : "max_steps", best_dev, rows.back().dev_l2, worst_rise, worst_area,
             lowest_h, hbound, worst_r, s));
  const double frac = steps ? static_cast<double>(dissip_ok) / static_cast<double>(steps) : 0.0;
  report(4, frac >= 0.9, fmt("dissipation identity within 10%% + 1e-8 on %.1f%% of %zu steps", 100.0 * frac, steps));
}

void criterion5() {
  std::vector<double> hs, interior, boundary;
  for (int level = 1; level <= 3; ++level) {
    const SimplicialMesh mesh = build_ball_mesh(3, level);
    const ScalarField u = sample(mesh, [](const Point& x) { return 1.0 + 0.3 * x[0] + 0.2 * x[1] * x[2]; });
    const ScalarField zeta = sample(mesh, [](const Point& x) { return std::cos(x[0]) + x[1] * x[1]; });
    const auto d = conformal_covariance_defect(mesh, u, zeta, 3);
    hs.push_back(mesh.mesh_size());
    interior.push_back(d.interior);
    boundary.push_back(d.boundary);
  }
  const double si = slope(hs, interior), sb = slope(hs, boundary);
  report(5, si >= 0.8 && sb >= 0.8,
         fmt("defect orders: interior %.2f (%.2e -> %.2e), boundary %.2f (%.2e -> %.2e)", si, interior.front(),
             interior.back(), sb, boundary.front(), boundary.back()));
}

int floor_vertex(const SimplicialMesh& mesh, const Point& p) {
  int best = -1;
  double d = 1e300;
  for (int v : mesh.boundary_vertices()) {
    const double e = (mesh.vertices()[static_cast<std::size_t>(v)] - p).norm();
    if (e < d) {
      d = e;
      best = v;
    }
  }
  return best;
}

void criterion6() {
  Timer t;
  double max_err_l2 = 0, prev_l2 = 1e300, min_off = 1e300, worst_res = 0, worst_sym = 0;
  bool decays = true, sym_ok = true;
  std::string detail;
  for (int level : {2, 3}) {
    const int res = 1 << (level + 1);
    const auto mesh = std::make_shared<const SimplicialMesh>(build_halfspace_box_mesh(3, 1.0, res));
    const DiscreteOperators ops = assemble(mesh);
    const int x0 = floor_vertex(*mesh, Point::Zero());
    const int x1 = floor_vertex(*mesh, Point(0.25, 0.0, 0.0));
    const GreensFunction g0 = greens_function(ops, x0, 3), g1 = greens_function(ops, x1, 3);
    double max_err = 0, l2 = 0, w = 0;
    for (std::size_t i = 0; i < mesh->num_vertices(); ++i) {
      if (g0.in_patch(static_cast<int>(i))) continue;
      const double r = (mesh->vertices()[i] - g0.chart.origin).norm();
      const double e = std::abs(g0.total.values[static_cast<Eigen::Index>(i)] * r - 1.0);
      max_err = std::max(max_err, e);
      l2 += ops.volume_weights[static_cast<Eigen::Index>(i)] * e * e;
      w += ops.volume_weights[static_cast<Eigen::Index>(i)];
      min_off = std::min(min_off, g0.total.values[static_cast<Eigen::Index>(i)]);
    }
    l2 = std::sqrt(l2 / w);
    if (level == 2) max_err_l2 = max_err;
    if (l2 >= prev_l2) decays = false;
    prev_l2 = l2;
    worst_res = std::max({worst_res, g0.relative_residual, g1.relative_residual});
    const double a = g0.total.values[x1], b = g1.total.values[x0];
    const double sym = std::abs(a - b) / std::max(a, b);
    worst_sym = std::max(worst_sym, sym);
    if (sym > 5.0 * mesh->mesh_size()) sym_ok = false;
    detail += fmt("level %d: max rel err %.3f, L2 rel err %.2e, symmetry %.1e (5h = %.2f); ", level, max_err, l2, sym,
                  5.0 * mesh->mesh_size());
  }
  const double s = t.seconds();
  report(6, max_err_l2 <= 0.15 && decays && min_off > 0.0 && worst_res <= 10 * kSolverTolerance && sym_ok && s < 120,
         detail + fmt("min off-patch G %.3f, residual %.1e, %.1f s", min_off, worst_res, s));
}

void criterion7() {
  Timer t;
  const GreensEvaluator flat = flat_greens_evaluator(1.0);
  double worst_flux = 0.0;
  for (double rho : {0.1, 0.2, 0.4}) worst_flux = std::max(worst_flux, std::abs(flux_integral(flat, {}, rho)) * rho);
  const std::vector<double> radii{8, 16, 32, 64};
  const double m0 = mass(MassSpec{{}, 1.0, radii}, 3).extrapolated;
  std::vector<double> per_eps;
  double worst_dual = 0.0;
  for (double eps : {0.025, 0.05, 0.1}) {
    MassSpec spec{[eps](const Point& y) -> Eigen::Matrix3d {
                    return (std::pow(1.0 + eps / y.norm(), 4) - 1.0) * Eigen::Matrix3d::Identity();
                  },
                  1.0, radii};
    const double a = mass(spec, 3, MassQuadrature::GaussProduct).extrapolated;
    const double b = mass(spec, 3, MassQuadrature::AdaptiveKronrod).extrapolated;
    per_eps.push_back(a / eps);
    worst_dual = std::max(worst_dual, std::abs(a - b) / std::abs(b));
  }
  const double lin = (*std::max_element(per_eps.begin(), per_eps.end()) -
                      *std::min_element(per_eps.begin(), per_eps.end())) /
                     per_eps[1];
  const double s = t.seconds();
  report(7, worst_flux <= 1e-6 && m0 == 0.0 && lin <= 0.01 && worst_dual <= 0.02 && s < 60,
         fmt("flat flux * rho <= %.1e, flat mass %.1e, m(eps)/eps spread %.2e (m/eps = %.4f vs 16 pi = %.4f), "
             "dual-rule gap %.1e, %.1f s",
             worst_flux, m0, lin, per_eps[1], 16 * M_PI, worst_dual, s));
}

void criterion8() {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 2));
  const DiscreteOperators ops = assemble(mesh);
  const auto nb = static_cast<Eigen::Index>(mesh->boundary_vertices().size());
  const BoundaryField w{Eigen::VectorXd::Ones(nb)};
  const auto pairs = steklov_eigensolve(ops, w, ops.mean_curvature, 4);
  const Eigen::MatrixXd gram = steklov_gram(ops, pairs, w);
  const double orth = (gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff();
  double worst = std::abs(pairs[0].lambda - 2.0) / 2.0;
  for (int i = 1; i < 4; ++i) worst = std::max(worst, std::abs(pairs[static_cast<std::size_t>(i)].lambda - 6.0) / 6.0);
  report(8, worst <= 0.1 && orth <= 1e-8,
         fmt("lambda = %.4f, %.4f, %.4f, %.4f (max rel err %.3f), orthonormality %.1e", pairs[0].lambda,
             pairs[1].lambda, pairs[2].lambda, pairs[3].lambda, worst, orth));
}

void criterion9() {
  Timer t;
  const double beta = bubble_energy(3), L = 40.0;
  struct Plant {
    std::vector<Eigen::Vector2d> centers;
    double eps;
    double smooth;
  };
  const std::vector<Plant> plants{{{}, 0.05, 0.0},
                                  {{Eigen::Vector2d(0.1, -0.05)}, 0.05, 0.0},
                                  {{Eigen::Vector2d(-2.0, 0.0), Eigen::Vector2d(2.0, 0.3)}, 0.02, 0.01}};
  bool ok = true;
  std::string detail;
  for (const auto& p : plants) {
    std::vector<double> cx{0.0}, cy{0.0};
    if (!p.centers.empty()) cx.clear(), cy.clear();
    for (const auto& c : p.centers) {
      cx.push_back(c[0]);
      cy.push_back(c[1]);
    }
    const auto mesh = std::make_shared<const SimplicialMesh>(
        build_tensor_box_mesh(graded_axis(-L, L, cx, p.eps, 0.3, 4.0), graded_axis(-L, L, cy, p.eps, 0.3, 4.0),
                              graded_axis(0.0, L, {0.0}, p.eps, 0.3, 4.0)));
    const DiscreteOperators ops = assemble(mesh);
    const ScalarField u = sample(*mesh, [&](const Point& x) {
      double s = p.smooth * std::exp(-x.squaredNorm() / 16.0);
      for (const auto& c : p.centers) s += bubble_value(Bubble{3, p.eps, c, BubbleConvention::Section3}, Eigen::VectorXd(x));
      return s;
    });
    const Decomposition d = struwe_decompose(ops, u, 3, beta);
    const std::size_t m = d.bubbles.size();
    bool case_ok = m == p.centers.size();
    double worst_center = 0.0, worst_eps = 0.0;
    for (const auto& c : p.centers) {
      double best = 1e300;
      const ExtractedBubble* match = nullptr;
      for (const auto& b : d.bubbles) {
        const double e = (b.center.head<2>() - c).norm();
        if (e < best) {
          best = e;
          match = &b;
        }
      }
      if (!match) continue;
      // One cell: the longest edge at the floor vertex nearest the planted center.
      const int v = floor_vertex(*mesh, Point(c[0], c[1], 0.0));
      double cell = 0.0;
      for (const auto& e : mesh->edges()) {
        if (e[0] == v || e[1] == v) cell = std::max(cell, (mesh->vertices()[e[0]] - mesh->vertices()[e[1]]).norm());
      }
      worst_center = std::max(worst_center, best / cell);
      worst_eps = std::max(worst_eps, std::abs(match->epsilon - p.eps) / p.eps);
    }
    const double quant = std::abs(d.energy - d.energy_u0 - static_cast<double>(m) * beta) / beta;
    const std::size_t again = struwe_decompose(ops, d.u0, 3, beta).bubbles.size();
    case_ok = case_ok && worst_center <= 1.0 && worst_eps <= 0.1 && quant <= 0.1 && again == 0;
    ok = ok && case_ok;
    detail += fmt("planted %zu -> m=%zu (center %.1e cells, eps err %.1e, |I-I0-m b*|/b* %.3f, idempotent m=%zu); ",
                  p.centers.size(), m, worst_center, worst_eps, quant, again);
  }
  const double s = t.seconds();
  report(9, ok && s < 120, detail + fmt("%.1f s", s));
}

void criterion10() {
  Timer t;
  const Point axes(1.1, 1.0, 0.9);
  const double factor = 8.0, rho = 0.4, bound = 1.05 * qball(3);
  const SimplicialMesh ball = build_ball_mesh(3, 2);
  double worst = 0.0;
  for (const Point& p : {Point(1, 0, 0), Point(0, 1, 0), Point(0, 0, 1), Point(Point(1, 1, 1).normalized())}) {
    const Point a = (factor - 1.0) / (factor + 1.0) * p;
    const auto mesh = std::make_shared<const SimplicialMesh>(
        map_vertices(ball, [&](const Point& x) { return Point(ball_mobius(x, a).cwiseProduct(axes)); }));
    const DiscreteOperators ops = assemble(mesh);
    const int x0 = floor_vertex(*mesh, p.cwiseProduct(axes));
    const GreensFunction g = greens_function(ops, x0, 3);
    for (double eps : {rho / 8.0, rho / 4.0}) {
      worst = std::max(worst, energy_E(ops, test_function(ops, x0, eps, rho, g, 2.0), 3));
    }
  }
  report(10, worst <= bound,
         fmt("max E(test function) = %.4f <= 1.05 qball(3) = %.4f (ratio %.4f), %.1f s", worst, bound,
             worst / qball(3), t.seconds()));
}

void criterion11() {
  Timer t;
  const auto dir = std::filesystem::temp_directory_path() / "ybf_acceptance";
  std::filesystem::create_directories(dir);
  const auto mesh = (dir / "ball2.json").string();
  std::ostringstream sink, err;
  bool ok = cli::run({"mesh", "gen", "--kind", "ball", "--level", "2", "--out", mesh, "--quiet"}, sink, err) == 0;
  std::string csv[2];
  for (int r = 0; r < 2; ++r) {
    const auto path = (dir / ("run" + std::to_string(r) + ".csv")).string();
    ok = ok && cli::run({"flow", "run", "--mesh", mesh, "--init", "perturb:0.2", "--steps", "10000", "--tol", "1e-3",
                         "--seed", "7", "--out", path, "--quiet"},
                        sink, err) == 0;
    if (ok) csv[r] = read_file(path);
  }
  const bool same = ok && !csv[0].empty() && csv[0] == csv[1];
  report(11, same, fmt("two CLI runs of the criterion 3 flow: %s (%zu bytes each), %.1f s",
                       same ? "byte-identical" : "differ", csv[0].size(), t.seconds()));
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks{criterion1, criterion2, criteria3and4, criterion5, criterion6,
                                                  criterion7, criterion8, criterion9, criterion10, criterion11};
  for (const auto& c : checks) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("[FAIL] exception: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
