#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "yamabe/bubbles.hpp"
#include "yamabe/conformal.hpp"
#include "yamabe/decomposition.hpp"
#include "yamabe/error.hpp"
#include "yamabe/flow.hpp"
#include "yamabe/greens.hpp"
#include "yamabe/io.hpp"
#include "yamabe/locate.hpp"

namespace yamabe::cli {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

Point parse_point(const std::string& text, const std::string& what) {
  const auto xs = parse_list(text, what);
  if (xs.size() != 3) throw UsageError(what + ": expected three comma-separated coordinates");
  return {xs[0], xs[1], xs[2]};
}

int nearest_boundary_vertex(const SimplicialMesh& mesh, const Point& p) {
  int best = -1;
  double d = std::numeric_limits<double>::infinity();
  for (int v : mesh.boundary_vertices()) {
    const double e = (mesh.vertices()[static_cast<std::size_t>(v)] - p).norm();
    if (e < d) {
      d = e;
      best = v;
    }
  }
  return best;
}

MetricPerturbation parse_metric(const std::string& spec) {
  if (spec == "flat") return {};
  const std::string prefix = "conformal:";
  if (spec.rfind(prefix, 0) == 0) {
    const auto eps = parse_list(spec.substr(prefix.size()), "--metric");
    if (eps.size() != 1) throw UsageError("--metric conformal:<eps>");
    const double e = eps[0];
    return [e](const Point& y) -> Eigen::Matrix3d {
      return (std::pow(1.0 + e / y.norm(), 4) - 1.0) * Eigen::Matrix3d::Identity();
    };
  }
  throw UsageError("--metric must be 'flat' or 'conformal:<eps>'");
}

std::string with_config(const json& config, const std::string& body_json) {
  // Prepend the config as the first key of a JSON object.
  return "{\"config\": " + config.dump() + ", " + body_json.substr(body_json.find('{') + 1);
}

struct Context {
  CLI::App* leaf = nullptr;
  std::string command;
  std::uint64_t seed = 0;
  std::string out_path;
  bool quiet = false;
  std::ostream* out = nullptr;

  json config() const {
    json j;
    j["command"] = command;
    j["seed"] = seed;
    for (const CLI::Option* opt : leaf->get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help") continue;
      const auto res = opt->reduced_results();
      if (!res.empty()) {
        j[name] = res.size() == 1 ? json(res.front()) : json(res);
      } else if (!opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j;
  }

  void emit(const std::string& content) const {
    if (out_path.empty()) {
      *out << content;
      if (!content.empty() && content.back() != '\n') *out << '\n';
    } else {
      write_file_atomic(out_path, content.back() == '\n' ? content : content + "\n");
    }
  }

  void info(const std::string& line) const {
    if (!quiet) *out << line << '\n';
  }
};

std::shared_ptr<const SimplicialMesh> load_shared(const std::string& path) {
  return std::make_shared<const SimplicialMesh>(load_mesh(path));
}

DiscreteOperators operators(std::shared_ptr<const SimplicialMesh> mesh, const std::string& h0) {
  DiscreteOperators ops = assemble(std::move(mesh));
  if (h0 == "discrete") return ops;
  const auto v = parse_list(h0, "--h0");
  if (v.size() != 1) throw UsageError("--h0 must be 'discrete' or a number");
  const auto nb = static_cast<Eigen::Index>(ops.m().boundary_vertices().size());
  return with_boundary_curvature(std::move(ops), BoundaryField{Eigen::VectorXd::Constant(nb, v[0])});
}

int resolve_pole(const SimplicialMesh& mesh, int pole, const std::string& pole_point) {
  if (pole >= 0) return pole;
  if (pole_point.empty()) throw UsageError("one of --pole or --pole-point is required");
  return nearest_boundary_vertex(mesh, parse_point(pole_point, "--pole-point"));
}

}  // namespace

ScalarField initial_field(const SimplicialMesh& mesh, const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("--init: expected <kind>:<args>, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  if (kind == "const") {
    const auto v = parse_list(arg, "--init const");
    if (v.size() != 1) throw UsageError("--init const:<v>");
    return sample(mesh, [c = v[0]](const Point&) { return c; });
  }
  if (kind == "perturb") {
    const auto v = parse_list(arg, "--init perturb");
    if (v.size() != 1) throw UsageError("--init perturb:<amp>");
    return sample(mesh, [a = v[0]](const Point& x) { return 1.0 + a * std::sin(x[0]); });
  }
  if (kind == "bubble") {
    const auto v = parse_list(arg, "--init bubble");
    if (v.size() != 3) throw UsageError("--init bubble:<eps>,<x>,<y>");
    // Centred at the point of dM closest to (x, y, lowest z): the floor of a
    // half-space box, the lower hemisphere of a ball.
    double zlo = std::numeric_limits<double>::infinity();
    for (const Point& p : mesh.vertices()) zlo = std::min(zlo, p[2]);
    const SurfaceLocator surface(mesh);
    const Point foot = surface.closest(Point(v[1], v[2], zlo)).point;
    BoundaryChart chart = boundary_chart(mesh, nearest_boundary_vertex(mesh, foot));
    chart.origin = foot;
    const Bubble b{3, v[0], {}, BubbleConvention::Section3};
    if (!(v[0] > 0.0)) throw UsageError("--init bubble: eps must be positive");
    return sample(mesh, [&](const Point& x) {
      return bubble_value(b, Eigen::VectorXd(fermi_coordinates(surface, chart, x)));
    });
  }
  if (kind == "file") {
    json j;
    try {
      j = json::parse(read_file(arg));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError, arg + ": " + e.what());
    }
    const json& values = j.is_object() && j.contains("values") ? j["values"] : j;
    if (!values.is_array() || values.size() != mesh.num_vertices()) {
      throw Error(ErrorCode::FormatError, arg + ": expected " + std::to_string(mesh.num_vertices()) + " values");
    }
    Eigen::VectorXd u(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i].is_number()) throw Error(ErrorCode::FormatError, arg + ": values[" + std::to_string(i) + "]");
      u[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    }
    return ScalarField{u};
  }
  throw UsageError("--init: unknown kind '" + kind + "'");
}

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args = args_in;

  // --config <json|path>: its keys are appended as flags, so they win.
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] != "--config") continue;
    if (i + 1 >= args.size()) {
      err << "error: --config needs a value\n";
      return 2;
    }
    json j;
    try {
      const std::string text = args[i + 1].rfind('{', 0) == 0 ? args[i + 1] : read_file(args[i + 1]);
      j = json::parse(text);
    } catch (const std::exception& e) {
      err << "error: --config: " << e.what() << '\n';
      return 2;
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    if (!j.is_object()) {
      err << "error: --config must be a JSON object\n";
      return 2;
    }
    for (const auto& [key, value] : j.items()) {
      if (value.is_boolean()) {
        if (value.get<bool>()) args.push_back("--" + key);
        continue;
      }
      args.push_back("--" + key);
      if (value.is_string()) {
        args.push_back(value.get<std::string>());
      } else if (value.is_array()) {
        std::string joined;
        for (const auto& x : value) joined += (joined.empty() ? "" : ",") + (x.is_string() ? x.get<std::string>() : x.dump());
        args.push_back(joined);
      } else {
        args.push_back(value.dump());
      }
    }
    break;
  }

  CLI::App app{"Boundary Yamabe flow toolkit", "ybf"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  Context ctx;
  ctx.out = &out;
  app.add_option("--seed", ctx.seed, "Seed for randomized profiles");
  app.add_option("--out", ctx.out_path, "Output file (written atomically); stdout if omitted");
  app.add_flag("--quiet", ctx.quiet, "Suppress informational output");
  app.add_option("--config", "JSON object or file whose keys override flags");

  // mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "Generate or validate meshes")->require_subcommand(1)->fallthrough();
  std::string kind = "ball", refine_point = "1,0,0", axes = "1.1,1,0.9", mesh_path, init = "perturb:0.2",
              h0 = "discrete", lp, normalization = "section3", pole_point, radii = "8,16,32,64", rule = "gauss",
              metric = "conformal:0.05", flux_metric = "flat", rhos = "0.1,0.2,0.4", field;
  int level = 2, resolution = 8, steps = 10000, pole = -1, count = 4, dim = 3, points = 100;
  double extent = 1.0, refine_factor = 1.0, tol = 1e-3, dt_max = 0.002, dt_safety = 0.1, eps = 1.0, decay = 1.0,
         beta_star = 0.0;
  auto* gen = mesh_cmd->add_subcommand("gen", "Generate a mesh")->fallthrough();
  gen->add_option("--kind", kind, "ball | box | ellipsoid")->check(CLI::IsMember({"ball", "box", "ellipsoid"}));
  gen->add_option("--level", level, "Ball refinement level (level 0 = 512 cells)");
  gen->add_option("--extent", extent, "Box half-width L of [-L,L]^2 x [0,L]");
  gen->add_option("--resolution", resolution, "Box cells per length L");
  gen->add_option("--refine-factor", refine_factor, "Mobius refinement factor near --refine-point");
  gen->add_option("--refine-point", refine_point, "Unit vector x,y,z");
  gen->add_option("--axes", axes, "Ellipsoid semi-axes a,b,c");
  auto* validate = mesh_cmd->add_subcommand("validate", "Load, validate and summarize a mesh")->fallthrough();
  validate->add_option("--mesh", mesh_path)->required();

  // flow
  auto* flow_cmd = app.add_subcommand("flow", "Boundary Yamabe flow")->require_subcommand(1)->fallthrough();
  auto* flow_run = flow_cmd->add_subcommand("run", "Run the flow and write the trajectory CSV")->fallthrough();
  flow_run->add_option("--mesh", mesh_path)->required();
  flow_run->add_option("--init", init, "const:<v> | perturb:<amp> | bubble:<eps>,<x>,<y> | file:<path>");
  flow_run->add_option("--steps", steps);
  flow_run->add_option("--tol", tol, "Convergence tolerance on ||H - Hbar||_L2");
  flow_run->add_option("--dt-max", dt_max);
  flow_run->add_option("--dt-safety", dt_safety);
  flow_run->add_option("--lp", lp, "Extra L^p deviation columns, comma-separated");
  flow_run->add_option("--h0", h0, "Background boundary curvature: discrete | <constant>");

  // bubbles
  auto* bub_cmd = app.add_subcommand("bubbles", "Bubble identities and decomposition")->require_subcommand(1)->fallthrough();
  auto* verify = bub_cmd->add_subcommand("verify", "Print sharp constants and PDE residuals")->fallthrough();
  verify->add_option("--dim", dim)->check(CLI::Range(3, 12));
  verify->add_option("--eps", eps);
  verify->add_option("--points", points);
  auto* decompose = bub_cmd->add_subcommand("decompose", "Bubble decomposition of a field")->fallthrough();
  decompose->add_option("--mesh", mesh_path)->required();
  decompose->add_option("--u", field, "Field, in the --init grammar")->required();
  decompose->add_option("--beta-star", beta_star, "Bubble energy quantum (default: closed form)");
  decompose->add_option("--h0", h0);

  // greens
  auto* greens_cmd = app.add_subcommand("greens", "Green's function and flux integral")->require_subcommand(1)->fallthrough();
  auto* solve = greens_cmd->add_subcommand("solve", "Solve for the Green's function")->fallthrough();
  solve->add_option("--mesh", mesh_path)->required();
  solve->add_option("--pole", pole, "Boundary vertex index");
  solve->add_option("--pole-point", pole_point, "Use the boundary vertex nearest to x,y,z");
  solve->add_option("--normalization", normalization)->check(CLI::IsMember({"section3", "appendixB"}));
  solve->add_option("--h0", h0);
  auto* flux = greens_cmd->add_subcommand("flux", "Flux integral over half spheres")->fallthrough();
  flux->add_option("--mesh", mesh_path, "Mesh for a numerical G; analytic flat G if omitted");
  flux->add_option("--pole", pole);
  flux->add_option("--pole-point", pole_point);
  flux->add_option("--rho", rhos, "Radii, comma-separated");
  flux->add_option("--metric", flux_metric, "flat | conformal:<eps>");
  flux->add_option("--h0", h0);

  // mass
  auto* mass_cmd = app.add_subcommand("mass", "Boundary mass")->require_subcommand(1)->fallthrough();
  auto* mass_eval = mass_cmd->add_subcommand("eval", "Partial masses and extrapolated limit")->fallthrough();
  mass_eval->add_option("--metric", metric, "flat | conformal:<eps>");
  mass_eval->add_option("--radii", radii);
  mass_eval->add_option("--decay", decay, "Decay order p");
  mass_eval->add_option("--rule", rule)->check(CLI::IsMember({"gauss", "kronrod"}));

  // eig
  auto* eig_cmd = app.add_subcommand("eig", "Steklov-type eigenproblem")->require_subcommand(1)->fallthrough();
  auto* eig_solve = eig_cmd->add_subcommand("solve", "Smallest eigenpairs")->fallthrough();
  eig_solve->add_option("--mesh", mesh_path)->required();
  eig_solve->add_option("--count", count);
  eig_solve->add_option("--h0", h0);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  for (CLI::App* group : app.get_subcommands()) {
    for (CLI::App* leaf : group->get_subcommands()) {
      ctx.leaf = leaf;
      ctx.command = group->get_name() + " " + leaf->get_name();
    }
  }

  try {
    if (ctx.leaf == gen) {
      SimplicialMesh mesh = kind == "box" ? build_halfspace_box_mesh(3, extent, resolution) : build_ball_mesh(3, level);
      if (kind != "box") {
        if (refine_factor < 1.0) throw UsageError("--refine-factor must be >= 1");
        const Point a = (refine_factor - 1.0) / (refine_factor + 1.0) * parse_point(refine_point, "--refine-point").normalized();
        const Point ax = kind == "ellipsoid" ? parse_point(axes, "--axes") : Point(1.0, 1.0, 1.0);
        if (refine_factor > 1.0 || kind == "ellipsoid") {
          mesh = map_vertices(mesh, [&](const Point& x) { return Point(ball_mobius(x, a).cwiseProduct(ax)); });
        }
      }
      ctx.emit(with_config(ctx.config(), mesh_to_json(mesh)));
      ctx.info("mesh: " + std::to_string(mesh.num_vertices()) + " vertices, " + std::to_string(mesh.num_cells()) +
               " cells, h = " + format_double(mesh.mesh_size()));
    } else if (ctx.leaf == validate) {
      const SimplicialMesh mesh = load_mesh(mesh_path);
      json j = ctx.config();
      json s;
      s["vertices"] = mesh.num_vertices();
      s["cells"] = mesh.num_cells();
      s["boundary_vertices"] = mesh.boundary_vertices().size();
      s["farfield_vertices"] = mesh.farfield_vertices().size();
      s["volume"] = mesh.total_volume();
      s["boundary_area"] = mesh.boundary_area();
      s["mesh_size"] = mesh.mesh_size();
      s["boundary_euler_characteristic"] = mesh.boundary_euler_characteristic();
      ctx.emit(json{{"config", j}, {"summary", s}}.dump(2));
    } else if (ctx.leaf == flow_run) {
      const auto mesh = load_shared(mesh_path);
      const DiscreteOperators ops = operators(mesh, h0);
      FlowConfig cfg;
      cfg.max_steps = steps;
      cfg.convergence_tol = tol;
      cfg.dt_max = dt_max;
      cfg.dt_safety = dt_safety;
      if (!lp.empty()) cfg.lp_exponents = parse_list(lp, "--lp");
      const BoundaryYamabeFlow flow(ops, cfg);
      FlowState state = flow.init(initial_field(*mesh, init));
      const TrajectoryRecord rec = flow.run(state);
      ctx.emit(trajectory_csv(rec, ctx.config().dump()));
      ctx.info(std::string("status: ") + (rec.status == FlowStatus::Converged ? "converged" : "max_steps") +
               ", steps: " + std::to_string(rec.rows.empty() ? 0 : rec.rows.size() - 1) +
               ", hbar_inf: " + format_double(rec.hbar_inf));
    } else if (ctx.leaf == verify) {
      std::mt19937_64 rng(ctx.seed);
      std::uniform_real_distribution<double> coord(-2.0, 2.0), height(0.01, 2.0);
      json rows = json::array();
      std::ostringstream table;
      table << "n  convention  K_n                  beta*                E(quadrature)        qball"
               "                interior_res  boundary_res  grad_fd_err\n";
      for (auto conv : {BubbleConvention::Section3, BubbleConvention::AppendixC}) {
        const Bubble b{dim, eps, Eigen::VectorXd::Zero(dim - 1), conv};
        std::vector<Eigen::VectorXd> pts;
        for (int i = 0; i < points; ++i) {
          Eigen::VectorXd y(dim);
          for (int k = 0; k < dim - 1; ++k) y[k] = coord(rng);
          y[dim - 1] = i % 2 == 0 ? height(rng) : 0.0;
          pts.push_back(y);
        }
        const PdeResiduals res = verify_bubble_pde(b, pts);
        const double fd = gradient_fd_error(b, std::vector<Eigen::VectorXd>(pts.begin(), pts.begin() + std::min<std::ptrdiff_t>(10, points)), 1e-5);
        const BubbleIntegrals q = bubble_energy_quadrature(b);
        const double energy_closed = bubble_energy(dim);
        const double e_quadrature = q.energy;
        const double qb = qball(dim, eps);
        const std::string name = conv == BubbleConvention::Section3 ? "section3" : "appendixC";
        rows.push_back({{"n", dim}, {"convention", name}, {"K_n", sobolev_constant(dim)}, {"beta_star", energy_closed},
                        {"energy_quadrature", e_quadrature}, {"qball", qb}, {"interior_residual", res.interior},
                        {"boundary_residual", res.boundary}, {"gradient_fd_error", fd}});
        char line[256];
        std::snprintf(line, sizeof line, "%d  %-10s  %.15f  %.15f  %.15f  %.15f  %.3e     %.3e     %.3e\n", dim,
                      name.c_str(), sobolev_constant(dim), energy_closed, e_quadrature, qb, res.interior,
                      res.boundary, fd);
        table << line;
      }
      if (ctx.out_path.empty() || !ctx.quiet) out << table.str();
      if (!ctx.out_path.empty()) ctx.emit(json{{"config", ctx.config()}, {"rows", rows}}.dump(2));
    } else if (ctx.leaf == decompose) {
      const auto mesh = load_shared(mesh_path);
      const DiscreteOperators ops = operators(mesh, h0);
      const double bs = beta_star > 0.0 ? beta_star : bubble_energy(3);
      const Decomposition d = struwe_decompose(ops, initial_field(*mesh, field), 3, bs);
      ctx.emit(with_config(ctx.config(), decomposition_to_json(d)));
      ctx.info("bubbles: " + std::to_string(d.bubbles.size()));
    } else if (ctx.leaf == solve) {
      const auto mesh = load_shared(mesh_path);
      const DiscreteOperators ops = operators(mesh, h0);
      const GreensFunction g = greens_function(ops, resolve_pole(*mesh, pole, pole_point), 3);
      const auto norm = normalization == "section3" ? GreensNormalization::Section3 : GreensNormalization::AppendixB;
      std::string body = greens_to_json(g, norm);
      body.pop_back();
      body += ", \"relative_residual\": " + format_double(g.relative_residual) +
              ", \"extrapolation_c\": " + format_double(g.extrapolation_c) +
              ", \"patch_radius\": " + format_double(g.patch_radius) + "}";
      ctx.emit(with_config(ctx.config(), body));
      ctx.info("pole " + std::to_string(g.pole) + ", residual " + format_double(g.relative_residual));
    } else if (ctx.leaf == flux) {
      const MetricPerturbation h = parse_metric(flux_metric);
      const auto rho = parse_list(rhos, "--rho");
      std::shared_ptr<const SimplicialMesh> mesh;
      std::optional<DiscreteOperators> ops;
      std::optional<GreensFunction> g;
      GreensEvaluator ev = flat_greens_evaluator(std::numeric_limits<double>::infinity());
      if (!mesh_path.empty()) {
        mesh = load_shared(mesh_path);
        ops = operators(mesh, h0);
        g = greens_function(*ops, resolve_pole(*mesh, pole, pole_point), 3);
        ev = mesh_greens_evaluator(*g);
      }
      json values = json::array();
      for (double r : rho) values.push_back(flux_integral(ev, h, r));
      ctx.emit(json{{"config", ctx.config()}, {"rho", rho}, {"flux", values}}.dump(2));
    } else if (ctx.leaf == mass_eval) {
      MassSpec spec{parse_metric(metric), decay, parse_list(radii, "--radii")};
      const MassReport rep =
          mass(spec, 3, rule == "gauss" ? MassQuadrature::GaussProduct : MassQuadrature::AdaptiveKronrod);
      ctx.emit(with_config(ctx.config(), mass_to_json(rep)));
      ctx.info("mass: " + format_double(rep.extrapolated));
    } else if (ctx.leaf == eig_solve) {
      const auto mesh = load_shared(mesh_path);
      const DiscreteOperators ops = operators(mesh, h0);
      const auto nb = static_cast<Eigen::Index>(mesh->boundary_vertices().size());
      const BoundaryField w{Eigen::VectorXd::Ones(nb)};
      const auto pairs = steklov_eigensolve(ops, w, ops.mean_curvature, count);
      const Eigen::MatrixXd gram = steklov_gram(ops, pairs, w);
      json lambdas = json::array();
      for (const auto& p : pairs) lambdas.push_back(p.lambda);
      const double orth = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
      ctx.emit(json{{"config", ctx.config()}, {"eigenvalues", lambdas}, {"orthonormality_error", orth}}.dump(2));
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace yamabe::cli
