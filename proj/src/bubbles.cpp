#include "yamabe/bubbles.hpp"

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "yamabe/error.hpp"

namespace yamabe {

namespace {

void check_dimension(int n) {
  if (n < 3) throw Error(ErrorCode::UnsupportedDimension, "bubbles need n >= 3");
}

// Pole of the bubble and its offset z = y - pole.
Eigen::VectorXd offset(const Bubble& b, const Eigen::VectorXd& y) {
  if (y.size() != b.n) throw Error(ErrorCode::InvalidArgument, "point dimension differs from n");
  Eigen::VectorXd z = y;
  if (b.center.size() > 0) z.head(b.n - 1) -= b.center;
  z[b.n - 1] += b.shift();
  return z;
}

void check_quadrature(double value, double error, double tol, const char* what) {
  if (!std::isfinite(value) || error > tol * std::max(std::abs(value), 1e-300)) {
    throw Error(ErrorCode::QuadratureNotConverged,
                std::string(what) + ": estimated relative error " + std::to_string(error / std::abs(value)));
  }
}

// rho^a (rho^2 + s^2)^{-b}, evaluated in log form so that quadrature nodes
// near 0 and infinity stay finite.
double radial_kernel(double rho, double s, double a, double b) {
  if (rho == 0.0) return a == 0.0 ? std::pow(s, -2.0 * b) : 0.0;
  if (!std::isfinite(rho)) return 0.0;
  const double big = std::max(rho, s), small = std::min(rho, s) / big;
  const double log_r2 = 2.0 * std::log(big) + std::log1p(small * small);
  return std::exp(a * std::log(rho) - b * log_r2);
}

}  // namespace

double Bubble::shift() const { return convention == BubbleConvention::Section3 ? epsilon : epsilon / (n - 2); }

double Bubble::boundary_constant() const { return convention == BubbleConvention::Section3 ? n - 2.0 : 1.0; }

// U = eps^k |z|^{-2k} with 2k = n - 2.
double bubble_value(const Bubble& b, const Eigen::VectorXd& y) {
  check_dimension(b.n);
  const double k = 0.5 * (b.n - 2);
  return std::pow(b.epsilon / offset(b, y).squaredNorm(), k);
}

Eigen::VectorXd bubble_gradient(const Bubble& b, const Eigen::VectorXd& y) {
  check_dimension(b.n);
  const Eigen::VectorXd z = offset(b, y);
  const double r2 = z.squaredNorm();
  const double u = std::pow(b.epsilon / r2, 0.5 * (b.n - 2));
  return -(b.n - 2.0) * u / r2 * z;
}

Eigen::MatrixXd bubble_hessian(const Bubble& b, const Eigen::VectorXd& y) {
  check_dimension(b.n);
  const Eigen::VectorXd z = offset(b, y);
  const double r2 = z.squaredNorm();
  const double u = std::pow(b.epsilon / r2, 0.5 * (b.n - 2));
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(b.n, b.n);
  return -(b.n - 2.0) * u / r2 * (id - b.n * z * z.transpose() / r2);
}

PdeResiduals verify_bubble_pde(const Bubble& b, const std::vector<Eigen::VectorXd>& points) {
  PdeResiduals r;
  const double c = b.boundary_constant();
  for (const auto& y : points) {
    const double yn = y[b.n - 1];
    if (yn < 0.0) throw Error(ErrorCode::InvalidArgument, "sample point below the half-space");
    if (yn > 0.0) {
      r.interior = std::max(r.interior, std::abs(bubble_hessian(b, y).trace()));
    } else {
      const double u = bubble_value(b, y);
      const double res = bubble_gradient(b, y)[b.n - 1] + c * std::pow(u, b.n / (b.n - 2.0));
      r.boundary = std::max(r.boundary, std::abs(res));
    }
  }
  return r;
}

double gradient_fd_error(const Bubble& b, const std::vector<Eigen::VectorXd>& points, double h) {
  double worst = 0.0;
  for (const auto& y : points) {
    const Eigen::VectorXd g = bubble_gradient(b, y);
    for (int i = 0; i < b.n; ++i) {
      Eigen::VectorXd yp = y, ym = y;
      yp[i] += h;
      ym[i] -= h;
      const double fd = (bubble_value(b, yp) - bubble_value(b, ym)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[i]));
    }
  }
  return worst;
}

double sphere_area(int k) { return 2.0 * std::pow(M_PI, 0.5 * (k + 1)) / boost::math::tgamma(0.5 * (k + 1)); }

double sobolev_constant(int n) {
  check_dimension(n);
  return std::pow(0.5 * (n - 2), -0.5) * std::pow(sphere_area(n - 1), -1.0 / (2.0 * (n - 1)));
}

double bubble_energy(int n) { return std::pow(sobolev_constant(n), -2.0 * (n - 1)) / (2.0 * (n - 1)); }

BubbleIntegrals bubble_energy_quadrature(const Bubble& b, double tol) {
  check_dimension(b.n);
  const int n = b.n;
  const double s = b.shift();
  const double eps = b.epsilon;
  boost::math::quadrature::exp_sinh<double> integrator, inner;
  // |dU|^2 = (n-2)^2 eps^{n-2} |z|^{-2(n-1)} over z_n > s, integrated in
  // cylindrical coordinates (rho = |zbar|, t = z_n).
  auto slab = [&](double t) {
    return inner.integrate(
        [&](double rho) { return radial_kernel(rho, t, n - 2.0, n - 1.0); }, 0.0,
        std::numeric_limits<double>::infinity(), tol * 1e-2);
  };
  double err = 0.0;
  const double outer = integrator.integrate(slab, s, std::numeric_limits<double>::infinity(), tol, &err);
  check_quadrature(outer, err, std::sqrt(tol), "Dirichlet integral");
  const double dirichlet = (n - 2.0) * (n - 2.0) * std::pow(eps, n - 2) * sphere_area(n - 2) * outer;

  const double bnd = integrator.integrate(
      [&](double rho) { return std::pow(eps, n - 1.0) * radial_kernel(rho, s, n - 2.0, n - 1.0); },
      0.0, std::numeric_limits<double>::infinity(), tol, &err);
  check_quadrature(bnd, err, std::sqrt(tol), "boundary integral");
  BubbleIntegrals out;
  out.dirichlet = dirichlet;
  out.boundary = sphere_area(n - 2) * bnd;
  out.energy = 0.5 * out.dirichlet - (n - 2.0) / (2.0 * (n - 1)) * b.boundary_constant() * out.boundary;
  return out;
}

double qball(int n, double epsilon, double tol) {
  check_dimension(n);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  const double v = integrator.integrate(
      [&](double rho) { return std::pow(epsilon, n - 1.0) * radial_kernel(rho, epsilon, n - 2.0, n - 1.0); },
      0.0, std::numeric_limits<double>::infinity(), tol * 1e-2, &err);
  check_quadrature(v, err, tol, "qball");
  return 4.0 * (n - 1) * std::pow(sphere_area(n - 2) * v, 1.0 / (n - 1));
}

double radial_trace_quotient(int n, const std::function<double(double)>& f,
                             const std::function<double(double)>& fprime, double support) {
  check_dimension(n);
  using boost::math::quadrature::gauss_kronrod;
  const double q = 2.0 * (n - 1) / (n - 2);
  double e1 = 0.0, e2 = 0.0;
  const double grad = gauss_kronrod<double, 61>::integrate(
      [&](double r) { return fprime(r) * fprime(r) * std::pow(r, n - 1); }, 0.0, support, 15, 1e-12, &e1);
  const double trace = gauss_kronrod<double, 61>::integrate(
      [&](double r) { return std::pow(std::abs(f(r)), q) * std::pow(r, n - 2); }, 0.0, support, 15, 1e-12, &e2);
  check_quadrature(grad, e1, 1e-8, "radial Dirichlet integral");
  check_quadrature(trace, e2, 1e-8, "radial trace integral");
  const double dirichlet = 0.5 * sphere_area(n - 1) * grad;
  return std::pow(sphere_area(n - 2) * trace, (n - 2.0) / (n - 1)) / dirichlet;
}

Eigen::VectorXd inversion_map(const Eigen::VectorXd& y) {
  const auto n = y.size();
  Eigen::VectorXd w = y;
  w[n - 1] += 1.0;
  Eigen::VectorXd out = w / w.squaredNorm();
  out[n - 1] -= 1.0;
  return out;
}

double inversion_conformality_defect(const Eigen::VectorXd& y, double h) {
  const auto n = y.size();
  Eigen::MatrixXd jac(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    jac.col(j) = (inversion_map(yp) - inversion_map(ym)) / (2.0 * h);
  }
  Eigen::VectorXd w = y;
  w[n - 1] += 1.0;
  const double factor = std::pow(w.squaredNorm(), -2.0);  // U_1^{4/(n-2)}
  const Eigen::MatrixXd defect = jac.transpose() * jac - factor * Eigen::MatrixXd::Identity(n, n);
  return defect.cwiseAbs().maxCoeff() / factor;
}

double cutoff_eta(double t) {
  constexpr double lo = 4.0 / 3.0, hi = 5.0 / 3.0;
  if (t <= lo) return 1.0;
  if (t >= hi) return 0.0;
  const double s = (t - lo) / (hi - lo);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

}  // namespace yamabe
