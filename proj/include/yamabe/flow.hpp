#pragma once

#include <string>
#include <utility>
#include <vector>

#include "yamabe/conformal.hpp"

namespace yamabe {

struct FlowConfig {
  double dt_max = 0.002;
  double dt_safety = 0.1;
  int max_steps = 10000;
  double convergence_tol = 1e-3;  // on ||H - Hbar||_{L2(dsigma_g)}
  double positivity_floor = 1e-12;
  std::vector<double> lp_exponents;  // extra ||H - Hbar||_{L^p} columns, 1 <= p < n

  void validate(int n) const;
};

struct FlowState {
  double t = 0.0;
  ScalarField u;
  CurvatureReport curvature;
  double sigma = 1.0;  // 1 - min(0, min H(0)); recorded only
  double area = 1.0;
};

struct TrajectoryRow {
  double t = 0.0;
  double hbar = 0.0;
  double area = 0.0;
  double umin = 0.0;
  double umax = 0.0;
  double hmin = 0.0;
  double dev_l2 = 0.0;
  std::vector<double> dev_lp;
  double dt = 0.0;  // size of the step that produced the row (0 for the initial row)
  double r_residual = 0.0;
};

enum class FlowStatus { Converged, MaxSteps };

struct TrajectoryRecord {
  std::vector<double> lp_exponents;
  std::vector<TrajectoryRow> rows;
  FlowStatus status = FlowStatus::MaxSteps;
  double hbar_inf = 0.0;  // last Hbar; the limit estimate when converged
  bool near_blowup = false;
  double mesh_size = 0.0;
};

// ||H - Hbar||_{L^p(dsigma_g)} with the lumped dsigma_g weights.
double curvature_deviation(const DiscreteOperators& ops, const FlowState& state, double p);

// Owns the harmonic extension solver so repeated steps reuse it.
class BoundaryYamabeFlow {
 public:
  BoundaryYamabeFlow(const DiscreteOperators& ops, FlowConfig config);

  FlowState init(const ScalarField& u0) const;
  FlowState step(const FlowState& state) const;
  TrajectoryRecord run(FlowState& state) const;

  TrajectoryRow row(const FlowState& state, double dt) const;
  const FlowConfig& config() const { return config_; }

 private:
  FlowState make_state(double t, ScalarField u, double sigma, const ScalarField* guess) const;

  const DiscreteOperators* ops_;
  FlowConfig config_;
  HarmonicExtension extension_;
  int n_;
};

FlowState init(const DiscreteOperators& ops, const ScalarField& u0, const FlowConfig& config);
FlowState step(const FlowState& state, const DiscreteOperators& ops, const FlowConfig& config);
TrajectoryRecord run(FlowState& state, const DiscreteOperators& ops, const FlowConfig& config);

// CSV trajectory; `header_comment` (typically the resolved config as JSON)
// is written as the first `# ` line.
std::string trajectory_csv(const TrajectoryRecord& record, const std::string& header_comment);

struct ConcentrationPoint {
  double r;
  double mu;
  int vertex;  // maximizing boundary vertex
};

// mu(r) = max over boundary vertices x of the boundary mass of
// u^{2(n-1)/(n-2)} dsigma_{g0} inside the graph-distance disc D_r(x).
std::vector<ConcentrationPoint> concentration_function(const DiscreteOperators& ops, const ScalarField& u,
                                                       const std::vector<double>& radii);

// Boundary graph distances (g0 edge lengths) from `source`, truncated at `cutoff`
// (vertices beyond it stay at +inf). Indexed by boundary slot.
std::vector<double> boundary_distances(const DiscreteOperators& ops, int source_slot, double cutoff);

}  // namespace yamabe
