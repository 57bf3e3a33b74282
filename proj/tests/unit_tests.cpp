#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "yamabe/bubbles.hpp"
#include "yamabe/conformal.hpp"
#include "yamabe/decomposition.hpp"
#include "yamabe/error.hpp"
#include "yamabe/flow.hpp"
#include "yamabe/greens.hpp"
#include "yamabe/io.hpp"
#include "yamabe/locate.hpp"

using namespace yamabe;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no yamabe::Error thrown");
  return ErrorCode::InvalidArgument;
}

int nearest_boundary(const SimplicialMesh& mesh, const Point& p) {
  int best = -1;
  double d = 1e300;
  for (int v : mesh.boundary_vertices()) {
    const double e = (mesh.vertices()[static_cast<std::size_t>(v)] - p).norm();
    if (e < d) d = e, best = v;
  }
  return best;
}

}  // namespace

TEST_CASE("ball mesh geometry converges to the unit ball") {
  double prev = 1e300;
  for (int level : {0, 1, 2}) {
    const SimplicialMesh m = build_ball_mesh(3, level);
    const double err = std::abs(m.total_volume() - 4.0 * M_PI / 3.0);
    CHECK(err < prev);
    prev = err;
    CHECK(m.boundary_euler_characteristic() == 2);
    CHECK_FALSE(m.has_farfield());
  }
  CHECK(std::abs(build_ball_mesh(3, 2).boundary_area() - 4.0 * M_PI) < 0.1);
}

TEST_CASE("box mesh has a far field and a flat floor") {
  const SimplicialMesh m = build_halfspace_box_mesh(3, 1.0, 4);
  CHECK(m.has_farfield());
  for (int v : m.boundary_vertices()) CHECK(m.vertices()[static_cast<std::size_t>(v)][2] == doctest::Approx(0.0));
  CHECK(m.total_volume() == doctest::Approx(4.0));
  CHECK(code_of([] { build_halfspace_box_mesh(3, 1.0, 0); }) == ErrorCode::InvalidResolution);
  CHECK(code_of([] { build_ball_mesh(4, 1); }) == ErrorCode::UnsupportedDimension);
}

TEST_CASE("mesh JSON round trip and inverted cells") {
  const SimplicialMesh m = build_ball_mesh(3, 0);
  CHECK(mesh_from_json(mesh_to_json(m)) == m);
  std::vector<Point> v{Point(0, 0, 0), Point(1, 0, 0), Point(0, 1, 0), Point(0, 0, 1)};
  std::vector<Face> faces{{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  std::vector<FaceTag> tags(4, FaceTag::Boundary);
  CHECK_NOTHROW(SimplicialMesh::create(3, v, {{0, 1, 2, 3}}, faces, tags));
  CHECK(code_of([&] { SimplicialMesh::create(3, v, {{1, 0, 2, 3}}, faces, tags); }) == ErrorCode::DegenerateCell);
  v[3] = Point(1, 1, 0);
  CHECK(code_of([&] { SimplicialMesh::create(3, v, {{0, 1, 2, 3}}, faces, tags); }) == ErrorCode::DegenerateCell);
}

TEST_CASE("graded axis is increasing and refined at centres") {
  const auto xs = graded_axis(-10, 10, {0.0, 0.0, 2.0}, 0.05, 0.3, 2.0);
  for (std::size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] > xs[i - 1]);
  double near = 1e300;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (std::abs(xs[i]) < 0.1) near = std::min(near, xs[i] - xs[i - 1]);
  CHECK(near <= 0.05 + 1e-12);
}

TEST_CASE("surface locator agrees with brute force") {
  const SimplicialMesh m = build_ball_mesh(3, 1);
  const SurfaceLocator loc(m);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  for (int i = 0; i < 200; ++i) {
    const Point p(d(rng), d(rng), d(rng));
    CHECK(loc.closest(p).distance == doctest::Approx(closest_boundary_point(m, p).distance).epsilon(1e-12));
  }
}

TEST_CASE("constant factor reproduces the embedded curvature of the ball") {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 2));
  const DiscreteOperators ops = assemble(mesh);
  const auto r = curvature(ops, sample(*mesh, [](const Point&) { return 1.0; }), 3);
  CHECK(r.Hbar == doctest::Approx(2.0).epsilon(0.02));
  CHECK(r.R_residual < 1e-8);
  // Scaling by a constant c scales H by c^{-2/(n-2)}.
  const auto s = curvature(ops, sample(*mesh, [](const Point&) { return 2.0; }), 3);
  CHECK(s.Hbar == doctest::Approx(r.Hbar / 4.0).epsilon(1e-10));
  CHECK(s.area == doctest::Approx(16.0 * r.area).epsilon(1e-10));
}

TEST_CASE("energy quotient homogeneity") {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 1));
  const DiscreteOperators ops = assemble(mesh);
  const ScalarField u = sample(*mesh, [](const Point& x) { return 1.0 + 0.3 * x[0]; });
  ScalarField v = u;
  v.values *= 3.7;
  CHECK(energy_E(ops, v, 3) == doctest::Approx(energy_E(ops, u, 3)).epsilon(1e-12));
  CHECK(energy_F(ops, v, 3) == doctest::Approx(energy_F(ops, u, 3) / (3.7 * 3.7)).epsilon(1e-12));
}

TEST_CASE("Steklov spectrum of the ball") {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 1));
  const DiscreteOperators ops = assemble(mesh);
  const BoundaryField w{Eigen::VectorXd::Ones(static_cast<Eigen::Index>(mesh->boundary_vertices().size()))};
  const auto pairs = steklov_eigensolve(ops, w, BoundaryField{w.values * 2.0}, 4);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].lambda == doctest::Approx(2.0).epsilon(1e-8));
  for (int i = 1; i < 4; ++i) CHECK(pairs[static_cast<std::size_t>(i)].lambda == doctest::Approx(6.0).epsilon(0.05));
  CHECK((steklov_gram(ops, pairs, w) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("flow keeps area, decreases Hbar and is deterministic") {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 1));
  const DiscreteOperators ops = assemble(mesh);
  FlowConfig cfg;
  cfg.max_steps = 50;
  cfg.lp_exponents = {1.5};
  const BoundaryYamabeFlow flow(ops, cfg);
  const ScalarField u0 = sample(*mesh, [](const Point& x) { return 1.0 + 0.2 * std::sin(x[0]); });
  FlowState a = flow.init(u0), b = flow.init(u0);
  const auto ra = flow.run(a), rb = flow.run(b);
  CHECK(trajectory_csv(ra, "x") == trajectory_csv(rb, "x"));
  for (std::size_t k = 1; k < ra.rows.size(); ++k) {
    CHECK(ra.rows[k].area == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ra.rows[k].hbar <= ra.rows[k - 1].hbar * (1 + 1e-12));
    CHECK(ra.rows[k].dt <= cfg.dt_max * (1 + 1e-12));
  }
  CHECK(ra.rows.front().dev_lp.size() == 1);
  ScalarField bad = u0;
  bad.values[0] = -1.0;
  CHECK(code_of([&] { flow.init(bad); }) == ErrorCode::NonpositiveConformalFactor);
}

TEST_CASE("bubble derivatives, energy and inversion") {
  std::vector<Eigen::VectorXd> pts;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.05, 2.0);
  for (int i = 0; i < 20; ++i) pts.push_back(Eigen::Vector3d(d(rng) - 1, d(rng) - 1, d(rng)));
  for (auto conv : {BubbleConvention::Section3, BubbleConvention::AppendixC}) {
    const Bubble b{3, 0.7, Eigen::Vector2d(0.1, -0.2), conv};
    CHECK(gradient_fd_error(b, pts, 1e-5) < 1e-6);
  }
  CHECK(bubble_energy(3) == doctest::Approx(M_PI / 4).epsilon(1e-14));
  CHECK(qball(3) == doctest::Approx(8.0 * std::sqrt(M_PI)).epsilon(1e-8));
  CHECK(sobolev_constant(3) == doctest::Approx(0.751125544465).epsilon(1e-10));
  CHECK(inversion_conformality_defect(Eigen::Vector3d(0.3, -0.4, 0.7)) < 1e-6);
  CHECK(cutoff_eta(0.5) == 1.0);
  CHECK(cutoff_eta(2.5) == 0.0);
}

TEST_CASE("Green's function errors and normalization") {
  const auto box = std::make_shared<const SimplicialMesh>(build_halfspace_box_mesh(3, 1.0, 8));
  const DiscreteOperators ops = assemble(box);
  int interior = -1;
  for (std::size_t i = 0; i < box->num_vertices(); ++i)
    if (!box->is_boundary_vertex(static_cast<int>(i)) && !box->is_farfield_vertex(static_cast<int>(i))) {
      interior = static_cast<int>(i);
      break;
    }
  CHECK(code_of([&] { greens_function(ops, interior, 3); }) == ErrorCode::PoleNotOnBoundary);
  const GreensFunction g = greens_function(ops, nearest_boundary(*box, Point::Zero()), 3);
  CHECK(g.conversion_factor(GreensNormalization::AppendixB) == doctest::Approx(1.0 / (4.0 * M_PI)));
  CHECK(g.conversion_factor(GreensNormalization::Section3) == 1.0);
  CHECK(std::isinf(g.total.values[g.pole]));
  CHECK(g.relative_residual < 1e-9);
  CHECK(code_of([] { flux_integral(flat_greens_evaluator(1.0), {}, 1.5); }) == ErrorCode::ChartTooSmall);
}

TEST_CASE("mass preconditions and linearity") {
  const MetricPerturbation h = [](const Point& y) -> Eigen::Matrix3d {
    return (std::pow(1.0 + 0.05 / y.norm(), 4) - 1.0) * Eigen::Matrix3d::Identity();
  };
  CHECK(code_of([&] { mass(MassSpec{h, 0.4, {8, 16, 32}}, 3); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { mass(MassSpec{h, 1.0, {16, 8, 32}}, 3); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { mass(MassSpec{h, 1.0, {8, 16, 32}}, 4); }) == ErrorCode::UnsupportedDimension);
  const MassReport r = mass(MassSpec{h, 1.0, {8, 16, 32, 64}}, 3);
  CHECK(r.extrapolated == doctest::Approx(16 * M_PI * 0.05).epsilon(1e-4));
  const auto [m, q] = richardson({1, 2, 4, 8}, {3 + 1.0, 3 + 0.5, 3 + 0.25, 3 + 0.125});
  CHECK(m == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(q == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("test function preconditions") {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_ball_mesh(3, 1));
  const DiscreteOperators ops = assemble(mesh);
  const int x0 = nearest_boundary(*mesh, Point(0, 0, -1));
  const GreensFunction g = greens_function(ops, x0, 3);
  CHECK(code_of([&] { test_function(ops, x0, 0.3, 0.4, g, 2.0); }) == ErrorCode::PreconditionRho);
  CHECK(code_of([&] { test_function(ops, x0, 0.1, 0.6, g, 2.0); }) == ErrorCode::ChartTooSmall);
  const ScalarField u = test_function(ops, x0, 0.05, 0.4, g, 2.0);
  CHECK(u.values.minCoeff() > 0.0);
}

TEST_CASE("Mobius map preserves the unit sphere") {
  const Point a(0.3, -0.2, 0.5);
  for (const Point& x : {Point(1, 0, 0), Point(0, 0, -1), Point(Point(1, 2, 3).normalized())})
    CHECK(ball_mobius(x, a).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((ball_mobius(Point::Zero(), a) - a).norm() < 1e-14);
}

TEST_CASE("decomposition of zero finds no bubbles") {
  const auto mesh = std::make_shared<const SimplicialMesh>(build_halfspace_box_mesh(3, 1.0, 4));
  const DiscreteOperators ops = assemble(mesh);
  const Decomposition d = struwe_decompose(ops, ScalarField{Eigen::VectorXd::Zero(
                                                     static_cast<Eigen::Index>(mesh->num_vertices()))},
                                           3, M_PI / 4);
  CHECK(d.bubbles.empty());
  CHECK(d.threshold == doctest::Approx(M_PI / 2));
}

TEST_CASE("cli exit codes") {
  std::ostringstream out, err;
  CHECK(cli::run({"flow", "run"}, out, err) == 2);
  CHECK(cli::run({"nonsense"}, out, err) == 2);
  CHECK(cli::run({"--help"}, out, err) == 0);
  CHECK(cli::run({"mass", "eval", "--metric", "conformal:0.05", "--radii", "8,16,32", "--decay", "0.4"}, out, err) ==
        1);
  out.str("");
  CHECK(cli::run({"bubbles", "verify", "--dim", "3", "--points", "10", "--quiet"}, out, err) == 0);
  CHECK(out.str().find("0.785398") != std::string::npos);
}

TEST_CASE("cli mesh and flow round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ybf_unit";
  std::filesystem::create_directories(dir);
  const auto mesh = (dir / "m.json").string(), a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  std::ostringstream out, err;
  REQUIRE(cli::run({"mesh", "gen", "--kind", "ball", "--level", "0", "--out", mesh, "--quiet"}, out, err) == 0);
  CHECK(cli::run({"mesh", "validate", "--mesh", mesh}, out, err) == 0);
  CHECK(cli::run({"flow", "run", "--mesh", mesh, "--init", "bogus:1"}, out, err) == 2);
  for (const auto& path : {a, b})
    REQUIRE(cli::run({"flow", "run", "--mesh", mesh, "--steps", "20", "--out", path, "--quiet"}, out, err) == 0);
  const std::string ca = read_file(a);
  CHECK(ca == read_file(b));
  CHECK(ca.rfind("# {", 0) == 0);
  const SimplicialMesh m = load_mesh(mesh);
  CHECK(cli::initial_field(m, "const:2").values.minCoeff() == 2.0);
  std::filesystem::remove_all(dir);
}
