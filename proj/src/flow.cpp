#include "yamabe/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "yamabe/error.hpp"
#include "yamabe/io.hpp"

namespace yamabe {

void FlowConfig::validate(int n) const {
  if (!(dt_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt_max must be positive");
  if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw Error(ErrorCode::InvalidArgument, "dt_safety must lie in (0, 1]");
  if (max_steps < 0) throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 0");
  if (!(convergence_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "convergence_tol must be positive");
  if (!(positivity_floor >= 0.0)) throw Error(ErrorCode::InvalidArgument, "positivity_floor must be >= 0");
  for (double p : lp_exponents) {
    if (!(p >= 1.0 && p < n)) {
      throw Error(ErrorCode::InvalidArgument, "recorded L^p exponents must satisfy 1 <= p < n");
    }
  }
}

double curvature_deviation(const DiscreteOperators& ops, const FlowState& state, double p) {
  const ConformalConstants k(ops.dimension());
  const auto& bv = ops.m().boundary_vertices();
  double s = 0.0;
  for (std::size_t j = 0; j < bv.size(); ++j) {
    const auto js = static_cast<Eigen::Index>(j);
    const double dsigma = ops.boundary_weights[js] * std::pow(state.u.values[bv[j]], k.critical);
    s += dsigma * std::pow(std::abs(state.curvature.H.values[js] - state.curvature.Hbar), p);
  }
  return std::pow(s, 1.0 / p);
}

BoundaryYamabeFlow::BoundaryYamabeFlow(const DiscreteOperators& ops, FlowConfig config)
    : ops_(&ops), config_(std::move(config)), extension_(ops), n_(ops.dimension()) {
  if (ops.m().has_farfield()) {
    throw Error(ErrorCode::InvalidArgument, "the flow runs on compact meshes without far-field faces");
  }
  config_.validate(n_);
}

FlowState BoundaryYamabeFlow::make_state(double t, ScalarField u, double sigma, const ScalarField* guess) const {
  const ConformalConstants k(n_);
  BoundaryField trace = restrict_to_boundary(ops_->m(), u);
  double area = 0.0;
  for (Eigen::Index s = 0; s < trace.values.size(); ++s) {
    area += ops_->boundary_weights[s] * std::pow(trace.values[s], k.critical);
  }
  trace.values *= std::pow(area, -(n_ - 2.0) / (2.0 * (n_ - 1.0)));
  FlowState st;
  st.t = t;
  st.u = extension_(trace, std::nullopt, guess);
  st.curvature = curvature(*ops_, st.u, n_);
  st.area = st.curvature.area;
  st.sigma = sigma;
  return st;
}

FlowState BoundaryYamabeFlow::init(const ScalarField& u0) const {
  if (u0.values.size() != static_cast<Eigen::Index>(ops_->m().num_vertices())) {
    throw Error(ErrorCode::InvalidArgument, "initial field size differs from vertex count");
  }
  if (!u0.values.allFinite() || u0.values.minCoeff() <= 0.0) {
    throw Error(ErrorCode::NonpositiveConformalFactor, "initial conformal factor must be positive");
  }
  FlowState st = make_state(0.0, u0, 1.0, nullptr);
  st.sigma = 1.0 - std::min(0.0, st.curvature.H.values.minCoeff());
  return st;
}

FlowState BoundaryYamabeFlow::step(const FlowState& state) const {
  const SimplicialMesh& mesh = ops_->m();
  const auto& bv = mesh.boundary_vertices();
  const Eigen::VectorXd dev = state.curvature.H.values.array() - state.curvature.Hbar;
  const double max_dev = dev.cwiseAbs().maxCoeff();
  double dt = config_.dt_max;
  if (max_dev > 0.0) dt = std::min(dt, config_.dt_safety / max_dev);

  ScalarField next = state.u;
  constexpr int kRetries = 20;
  for (int attempt = 0;; ++attempt) {
    bool ok = true;
    for (std::size_t s = 0; s < bv.size(); ++s) {
      const double v = state.u.values[bv[s]] * (1.0 - 0.5 * (n_ - 2.0) * dt * dev[static_cast<Eigen::Index>(s)]);
      if (!(v > config_.positivity_floor)) ok = false;
      next.values[bv[s]] = v;
    }
    if (ok) break;
    if (attempt == kRetries) {
      throw Error(ErrorCode::PositivityViolated, "boundary value would cross the positivity floor after " +
                                                     std::to_string(kRetries) + " step halvings (t = " +
                                                     format_double(state.t) + ")");
    }
    dt *= 0.5;
  }
  FlowState out = make_state(state.t + dt, std::move(next), state.sigma, &state.u);
  return out;
}

TrajectoryRow BoundaryYamabeFlow::row(const FlowState& state, double dt) const {
  TrajectoryRow r;
  r.t = state.t;
  r.hbar = state.curvature.Hbar;
  r.area = state.area;
  r.umin = state.u.values.minCoeff();
  r.umax = state.u.values.maxCoeff();
  r.hmin = state.curvature.H.values.minCoeff();
  r.dev_l2 = curvature_deviation(*ops_, state, 2.0);
  for (double p : config_.lp_exponents) r.dev_lp.push_back(curvature_deviation(*ops_, state, p));
  r.dt = dt;
  r.r_residual = state.curvature.R_residual;
  return r;
}

TrajectoryRecord BoundaryYamabeFlow::run(FlowState& state) const {
  TrajectoryRecord rec;
  rec.lp_exponents = config_.lp_exponents;
  rec.mesh_size = ops_->m().mesh_size();
  rec.hbar_inf = state.curvature.Hbar;
  if (config_.max_steps == 0) return rec;
  auto push = [&](double dt) {
    rec.rows.push_back(row(state, dt));
    const TrajectoryRow& r = rec.rows.back();
    if (r.umin / r.umax < 1e-6) rec.near_blowup = true;
    rec.hbar_inf = r.hbar;
    return r.dev_l2 < config_.convergence_tol;
  };
  if (push(0.0)) {
    rec.status = FlowStatus::Converged;
    return rec;
  }
  for (int k = 0; k < config_.max_steps; ++k) {
    const double t0 = state.t;
    state = step(state);
    if (push(state.t - t0)) {
      rec.status = FlowStatus::Converged;
      return rec;
    }
  }
  rec.status = FlowStatus::MaxSteps;
  return rec;
}

FlowState init(const DiscreteOperators& ops, const ScalarField& u0, const FlowConfig& config) {
  return BoundaryYamabeFlow(ops, config).init(u0);
}

FlowState step(const FlowState& state, const DiscreteOperators& ops, const FlowConfig& config) {
  return BoundaryYamabeFlow(ops, config).step(state);
}

TrajectoryRecord run(FlowState& state, const DiscreteOperators& ops, const FlowConfig& config) {
  return BoundaryYamabeFlow(ops, config).run(state);
}

std::string trajectory_csv(const TrajectoryRecord& record, const std::string& header_comment) {
  std::ostringstream os;
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  if (record.near_blowup) os << "# near_blowup=true\n";
  os << "t,hbar,area,umin,umax,hmin,dev_l2";
  for (double p : record.lp_exponents) os << ",dev_l" << format_double(p);
  os << ",dt,r_residual\n";
  for (const TrajectoryRow& r : record.rows) {
    os << format_double(r.t) << ',' << format_double(r.hbar) << ',' << format_double(r.area) << ','
       << format_double(r.umin) << ',' << format_double(r.umax) << ',' << format_double(r.hmin) << ','
       << format_double(r.dev_l2);
    for (double v : r.dev_lp) os << ',' << format_double(v);
    os << ',' << format_double(r.dt) << ',' << format_double(r.r_residual) << "\n";
  }
  os << "# status=" << (record.status == FlowStatus::Converged ? "converged" : "max_steps") << "\n";
  os << "# hbar_inf=" << format_double(record.hbar_inf) << "\n";
  return os.str();
}

namespace {

// Boundary adjacency with g0 edge lengths, indexed by boundary slot.
std::vector<std::vector<std::pair<int, double>>> boundary_graph(const DiscreteOperators& ops) {
  const SimplicialMesh& mesh = ops.m();
  const auto& v = mesh.vertices();
  std::vector<std::vector<std::pair<int, double>>> adj(mesh.boundary_vertices().size());
  const int n = mesh.dimension();
  for (const auto& e : mesh.boundary_edges()) {
    const int a = mesh.boundary_slot(e[0]), b = mesh.boundary_slot(e[1]);
    if (a < 0 || b < 0) continue;
    double len = (v[e[0]] - v[e[1]]).norm();
    if (!mesh.metric().is_euclidean()) {
      const auto& phi = *mesh.metric().conformal_factor;
      len *= 0.5 * (std::pow(phi[e[0]], 2.0 / (n - 2)) + std::pow(phi[e[1]], 2.0 / (n - 2)));
    }
    adj[static_cast<std::size_t>(a)].emplace_back(b, len);
    adj[static_cast<std::size_t>(b)].emplace_back(a, len);
  }
  return adj;
}

std::vector<double> dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj, int source,
                             double cutoff, std::vector<int>* reached) {
  std::vector<double> dist(adj.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[static_cast<std::size_t>(source)] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, a] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(a)]) continue;
    if (reached) reached->push_back(a);
    for (const auto& [b, len] : adj[static_cast<std::size_t>(a)]) {
      const double nd = d + len;
      if (nd <= cutoff && nd < dist[static_cast<std::size_t>(b)]) {
        dist[static_cast<std::size_t>(b)] = nd;
        queue.emplace(nd, b);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<double> boundary_distances(const DiscreteOperators& ops, int source_slot, double cutoff) {
  return dijkstra(boundary_graph(ops), source_slot, cutoff, nullptr);
}

std::vector<ConcentrationPoint> concentration_function(const DiscreteOperators& ops, const ScalarField& u,
                                                       const std::vector<double>& radii) {
  const SimplicialMesh& mesh = ops.m();
  const ConformalConstants k(mesh.dimension());
  for (double r : radii) {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "radii must be positive");
  }
  std::vector<ConcentrationPoint> out;
  if (radii.empty()) return out;
  const auto& bv = mesh.boundary_vertices();
  std::vector<double> mass(bv.size());
  for (std::size_t s = 0; s < bv.size(); ++s) {
    mass[s] = ops.boundary_weights[static_cast<Eigen::Index>(s)] * std::pow(std::abs(u.values[bv[s]]), k.critical);
  }
  const double rmax = *std::max_element(radii.begin(), radii.end());
  const auto adj = boundary_graph(ops);
  for (double r : radii) out.push_back({r, 0.0, -1});
  std::vector<int> reached;
  for (std::size_t s = 0; s < bv.size(); ++s) {
    reached.clear();
    const auto dist = dijkstra(adj, static_cast<int>(s), rmax, &reached);
    for (auto& pt : out) {
      double m = 0.0;
      for (int b : reached) {
        if (dist[static_cast<std::size_t>(b)] <= pt.r) m += mass[static_cast<std::size_t>(b)];
      }
      if (m > pt.mu) {
        pt.mu = m;
        pt.vertex = bv[s];
      }
    }
  }
  return out;
}

}  // namespace yamabe
