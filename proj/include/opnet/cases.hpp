#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opnet/operator_data.hpp"
#include "opnet/svd.hpp"

namespace opnet {

using Bounds = std::vector<std::pair<double, double>>;

/// Latin hypercube design: n points (columns) in the box, one per stratum in
/// every dimension.
Eigen::MatrixXd lhs_sample(const Bounds& bounds, std::size_t n, std::uint64_t seed);

struct MsdParams {
  double k = 3.0;
  double c = 0.5;
  double m = 1.0;
};

/// Closed-form mass-spring-damper response; returns 2 x T rows (x, v).
Eigen::MatrixXd msd_solve(double x0, double v0, const MsdParams& params, const Eigen::VectorXd& times);

using OdeRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)>;

/// Classical RK4 with equal substeps no longer than `max_step` between
/// consecutive output times; returns state_dim x T. The first output time
/// is the initial time.
Eigen::MatrixXd rk4_integrate(const OdeRhs& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                              double max_step);

/// a tanh(t - b x0) + a tanh(b x0) + x0.
double tanh_solution(double x0, double t, double a = 1.0, double b = 1.0);

struct RigidBodyParams {
  double z0 = 1.0;
  double vz = 0.2;
  double lx = 8.0;
  double ly = 6.0;
  double ax = 10.0;
  double bx = 10.0;
  double ay = 10.0;
  double by = 10.0;
  double theta0 = 0.0;
  double vtheta = 3.14159265358979323846;
  double omega_theta = 2.0 * 3.14159265358979323846 * 3.14159265358979323846 / 10.0;
  double t_end = 10.0;
  double phi_theta = 2.0;
  double s0 = 2.0;
  double vs = 1.0;
  double omega_s = 2.0 * 3.14159265358979323846 * 3.14159265358979323846 / 10.0;
  double phi_s = 0.0;
  double xc0 = 1.0;
  double yc0 = -0.5;
  double vxi = 0.5;
  double omega_xi = 5.0 * 3.14159265358979323846 / 18.0;
};

/// Body frame at time t.
struct RigidBodyFrame {
  double theta = 0.0;
  double s = 1.0;
  double xc = 0.0;
  double yc = 0.0;
  double zs = 0.0;
};

RigidBodyFrame rigid_body_frame(double t, const RigidBodyParams& params = {});
double rigid_body_field(double x, double y, double t, const RigidBodyParams& params = {});

/// Scenarios sharing a y grid. values[v] is T x S (one column per scenario).
struct ScenarioSet {
  std::string case_id;
  std::vector<std::string> variables;
  Eigen::MatrixXd inputs;               ///< du x S
  std::vector<Eigen::MatrixXd> y;       ///< per scenario, dy x T_j
  std::vector<std::vector<Eigen::VectorXd>> values;  ///< [variable][scenario] -> T_j

  std::size_t scenarios() const { return static_cast<std::size_t>(inputs.cols()); }
  void validate() const;
  /// Requires a common y grid; throws GridRequired otherwise.
  GridData to_grid() const;
  PointData to_points() const;
};

/// Scenario-aggregated matrix of one variable: T x S, col_meta = inputs.
SnapshotMatrix assemble_scenario_matrix(const ScenarioSet& set, std::size_t variable);

/// Planar field sampled on a rectangular grid: row index = ix * ny + iy
/// (row-major over (x, y)), one column per time.
SnapshotMatrix assemble_time_matrix(const std::function<double(double x, double y, double t)>& field,
                                    const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, const Eigen::VectorXd& times);

/// Grid coordinates in the assemble_time_matrix row order, 2 x (nx * ny).
Eigen::MatrixXd grid_points(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys);

struct Tc1Options {
  std::size_t scenarios = 100;
  std::size_t times = 500;
  double t_end = 15.0;
  Bounds bounds{{-4.0, 4.0}, {-4.0, 4.0}};
  MsdParams params;
};

struct Tc2Options {
  std::size_t scenarios = 100;
  std::size_t times = 500;
  double t_end = 15.0;
  Bounds bounds{{5.0, 10.0}};
  double a = 1.0;
  double b = 1.0;
  bool random_times = false;
};

struct Tc4Options {
  std::size_t grid = 100;      ///< per axis, for the time-aggregated matrix
  std::size_t times = 100;     ///< snapshot times in [0, t_end]
  double half_width = 15.0;    ///< snapshot/test grid covers (-half_width, half_width)^2
  double train_half_width = 10.0;
  std::size_t train_points = 200000;
  RigidBodyParams params;
};

/// Mass-spring-damper scenarios: u = (x0, v0), y = t, variables (x, v).
ScenarioSet tc1_scenarios(const Tc1Options& opt, std::uint64_t seed);
/// Shifting tanh scenarios: u = x0, y = t, variable x.
ScenarioSet tc2_scenarios(const Tc2Options& opt, std::uint64_t seed);

/// Rigid body desk-scale time-aggregated snapshot matrix.
SnapshotMatrix tc4_snapshots(const Tc4Options& opt);
/// Random training points: u = t, y = (x, y), variable z.
PointData tc4_training_points(const Tc4Options& opt, std::uint64_t seed);
/// Field on the test grid at the given times: u = t, y = grid, variable z.
GridData tc4_grid(const Tc4Options& opt, const Eigen::VectorXd& times);

/// Seed for held-out scenarios; disjoint from the training stream.
std::uint64_t test_seed(std::uint64_t seed);

}  // namespace opnet
