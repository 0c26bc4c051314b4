#include "opnet/cases.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "opnet/errors.hpp"
#include "opnet/rng.hpp"

namespace opnet {

Eigen::MatrixXd lhs_sample(const Bounds& bounds, std::size_t n, std::uint64_t seed) {
  if (bounds.empty()) throw Error(ErrorKind::InvalidBounds, "at least one dimension is required");
  if (n == 0) throw Error(ErrorKind::InvalidBounds, "sample count must be positive");
  for (const auto& [lo, hi] : bounds) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      throw Error(ErrorKind::InvalidBounds, "need finite lo < hi, got (" + std::to_string(lo) + ", " +
                                                std::to_string(hi) + ")");
    }
  }
  Rng rng = stream_rng(seed, "lhs");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(bounds.size()), static_cast<Eigen::Index>(n));
  std::vector<std::size_t> strata(n);
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    for (std::size_t i = 0; i < n; ++i) strata[i] = i;
    rng.shuffle(strata);
    const auto [lo, hi] = bounds[d];
    const double width = (hi - lo) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double x = lo + (static_cast<double>(strata[i]) + rng.uniform()) * width;
      // Guard against rounding up into the next stratum.
      const double top = lo + static_cast<double>(strata[i] + 1) * width;
      if (x >= top) x = std::nextafter(top, lo);
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = x;
    }
  }
  return out;
}

Eigen::MatrixXd msd_solve(double x0, double v0, const MsdParams& p, const Eigen::VectorXd& times) {
  if (!(p.m > 0.0) || p.k < 0.0 || p.c < 0.0) throw Error(ErrorKind::InvalidData, "need m > 0 and k, c >= 0");
  const double gamma = p.c / (2.0 * p.m);
  const double w0sq = p.k / p.m;
  const double disc = gamma * gamma - w0sq;
  const double tol = 1e-12 * std::max(w0sq, gamma * gamma);
  Eigen::MatrixXd out(2, times.size());
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    const double t = times(i);
    const double decay = std::exp(-gamma * t);
    double x = 0.0;
    double v = 0.0;
    if (disc < -tol) {
      const double wd = std::sqrt(-disc);
      const double a = x0;
      const double b = (v0 + gamma * x0) / wd;
      const double c = std::cos(wd * t);
      const double s = std::sin(wd * t);
      x = decay * (a * c + b * s);
      v = decay * ((b * wd - gamma * a) * c - (a * wd + gamma * b) * s);
    } else if (disc > tol) {
      const double root = std::sqrt(disc);
      const double l1 = -gamma + root;
      const double l2 = -gamma - root;
      const double c1 = (v0 - l2 * x0) / (l1 - l2);
      const double c2 = x0 - c1;
      x = c1 * std::exp(l1 * t) + c2 * std::exp(l2 * t);
      v = c1 * l1 * std::exp(l1 * t) + c2 * l2 * std::exp(l2 * t);
    } else {
      const double b = v0 + gamma * x0;
      x = (x0 + b * t) * decay;
      v = (b - gamma * (x0 + b * t)) * decay;
    }
    out(0, i) = x;
    out(1, i) = v;
  }
  return out;
}

Eigen::MatrixXd rk4_integrate(const OdeRhs& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                              double max_step) {
  if (times.size() == 0) throw Error(ErrorKind::InvalidData, "no output times");
  if (!(max_step > 0.0)) throw Error(ErrorKind::InvalidData, "max_step must be positive");
  Eigen::MatrixXd out(x0.size(), times.size());
  Eigen::VectorXd x = x0;
  out.col(0) = x;
  std::size_t steps = 0;
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    const double t0 = times(i - 1);
    const double dt = times(i) - t0;
    if (dt < 0.0) throw Error(ErrorKind::InvalidData, "output times must be sorted");
    const auto nsub = static_cast<long long>(std::ceil(dt / max_step - 1e-9));
    const double h = nsub > 0 ? dt / static_cast<double>(nsub) : 0.0;
    for (long long k = 0; k < nsub; ++k) {
      const double t = t0 + static_cast<double>(k) * h;
      const Eigen::VectorXd k1 = f(t, x);
      const Eigen::VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
      const Eigen::VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
      const Eigen::VectorXd k4 = f(t + h, x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ++steps;
      if (!x.allFinite()) throw NumericalFailure("state became non-finite at t = " + std::to_string(t + h), steps);
    }
    out.col(i) = x;
  }
  return out;
}

double tanh_solution(double x0, double t, double a, double b) {
  return a * std::tanh(t - b * x0) + a * std::tanh(b * x0) + x0;
}

RigidBodyFrame rigid_body_frame(double t, const RigidBodyParams& p) {
  RigidBodyFrame f;
  f.theta = p.theta0 + p.vtheta * std::cos(p.omega_theta * t + p.phi_theta);
  f.s = p.s0 + p.vs * std::sin(p.omega_s * t + p.phi_s);
  const double xi = p.omega_xi * t;
  f.xc = p.xc0 + p.vxi * xi * std::cos(xi);
  f.yc = p.yc0 + p.vxi * xi * std::sin(xi);
  f.zs = p.z0 + p.vz * t;
  return f;
}

double rigid_body_field(double x, double y, double t, const RigidBodyParams& p) {
  const RigidBodyFrame f = rigid_body_frame(t, p);
  const double c = std::cos(f.theta);
  const double s = std::sin(f.theta);
  const double xi = f.s * (c * x - s * y) + f.xc;
  const double yi = f.s * (s * x + c * y) + f.yc;
  const double zx = 0.5 * std::tanh(p.ax * (xi + p.lx)) + 0.5 * std::tanh(p.bx * (xi - p.lx));
  const double zy = 0.5 * std::tanh(p.ay * (yi + p.ly)) + 0.5 * std::tanh(p.by * (yi - p.ly));
  return std::exp(zx + zy) * f.zs;
}

void ScenarioSet::validate() const {
  const std::size_t s = scenarios();
  if (variables.empty() || values.size() != variables.size()) {
    throw Error(ErrorKind::InvalidShape, "one value table per variable is required");
  }
  if (y.size() != s) throw Error(ErrorKind::InvalidShape, "one y grid per scenario is required");
  if (!inputs.allFinite()) throw Error(ErrorKind::InvalidData, "non-finite scenario input");
  for (const auto& var : values) {
    if (var.size() != s) throw Error(ErrorKind::InvalidShape, "one value array per scenario is required");
    for (std::size_t j = 0; j < s; ++j) {
      if (var[j].size() != y[j].cols()) throw Error(ErrorKind::InvalidShape, "value count does not match the y grid");
      if (!var[j].allFinite()) throw Error(ErrorKind::InvalidData, "non-finite value in scenario " + std::to_string(j));
    }
  }
}

GridData ScenarioSet::to_grid() const {
  validate();
  if (scenarios() == 0) throw Error(ErrorKind::InvalidShape, "empty scenario set");
  for (const auto& g : y) {
    if (g.rows() != y.front().rows() || g.cols() != y.front().cols() || g != y.front()) {
      throw Error(ErrorKind::GridRequired, "scenarios do not share one y grid");
    }
  }
  GridData out;
  out.variables = variables;
  out.u = inputs;
  out.y = y.front();
  for (const auto& var : values) {
    Eigen::MatrixXd m(out.y.cols(), inputs.cols());
    for (std::size_t j = 0; j < var.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = var[j];
    out.values.push_back(std::move(m));
  }
  return out;
}

PointData ScenarioSet::to_points() const {
  validate();
  Eigen::Index total = 0;
  for (const auto& g : y) total += g.cols();
  PointData out;
  out.variables = variables;
  out.u.resize(inputs.rows(), total);
  out.y.resize(y.empty() ? 0 : y.front().rows(), total);
  out.values.resize(static_cast<Eigen::Index>(variables.size()), total);
  Eigen::Index c = 0;
  for (std::size_t j = 0; j < scenarios(); ++j) {
    const Eigen::Index t = y[j].cols();
    out.u.middleCols(c, t) = inputs.col(static_cast<Eigen::Index>(j)).replicate(1, t);
    out.y.middleCols(c, t) = y[j];
    for (std::size_t v = 0; v < variables.size(); ++v) {
      out.values.row(static_cast<Eigen::Index>(v)).segment(c, t) = values[v][j].transpose();
    }
    c += t;
  }
  return out;
}

SnapshotMatrix assemble_scenario_matrix(const ScenarioSet& set, std::size_t variable) {
  if (variable >= set.variables.size()) throw Error(ErrorKind::InvalidShape, "unknown variable index");
  GridData grid = set.to_grid();
  return SnapshotMatrix(std::move(grid.values[variable]), Aggregation::ScenarioAggregated, grid.y.transpose(),
                        grid.u.transpose());
}

Eigen::MatrixXd grid_points(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) {
  Eigen::MatrixXd out(2, xs.size() * ys.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    for (Eigen::Index j = 0; j < ys.size(); ++j) {
      out(0, i * ys.size() + j) = xs(i);
      out(1, i * ys.size() + j) = ys(j);
    }
  }
  return out;
}

SnapshotMatrix assemble_time_matrix(const std::function<double(double, double, double)>& field,
                                    const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                                    const Eigen::VectorXd& times) {
  const Eigen::MatrixXd pts = grid_points(xs, ys);
  Eigen::MatrixXd values(pts.cols(), times.size());
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    for (Eigen::Index r = 0; r < pts.cols(); ++r) values(r, k) = field(pts(0, r), pts(1, r), times(k));
  }
  return SnapshotMatrix(std::move(values), Aggregation::TimeAggregated, pts.transpose(), times);
}

std::uint64_t test_seed(std::uint64_t seed) { return derive_seed(seed, "held-out"); }

ScenarioSet tc1_scenarios(const Tc1Options& opt, std::uint64_t seed) {
  const Eigen::MatrixXd u = lhs_sample(opt.bounds, opt.scenarios, derive_seed(seed, "tc1"));
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(opt.times), 0.0, opt.t_end);
  ScenarioSet set;
  set.case_id = "tc1";
  set.variables = {"x", "v"};
  set.inputs = u;
  set.values.assign(2, {});
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const Eigen::MatrixXd xv = msd_solve(u(0, j), u(1, j), opt.params, t);
    set.y.push_back(t.transpose());
    set.values[0].push_back(xv.row(0).transpose());
    set.values[1].push_back(xv.row(1).transpose());
  }
  return set;
}

ScenarioSet tc2_scenarios(const Tc2Options& opt, std::uint64_t seed) {
  const Eigen::MatrixXd u = lhs_sample(opt.bounds, opt.scenarios, derive_seed(seed, "tc2"));
  const auto nt = static_cast<Eigen::Index>(opt.times);
  Eigen::VectorXd t(nt);
  if (opt.random_times) {
    Rng rng = stream_rng(seed, "tc2/times");
    for (Eigen::Index i = 0; i < nt; ++i) t(i) = opt.t_end * rng.uniform();
    std::sort(t.data(), t.data() + nt);
  } else {
    for (Eigen::Index i = 0; i < nt; ++i) t(i) = opt.t_end * static_cast<double>(i + 1) / static_cast<double>(nt + 1);
  }
  ScenarioSet set;
  set.case_id = "tc2";
  set.variables = {"x"};
  set.inputs = u;
  set.values.assign(1, {});
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::VectorXd x(nt);
    for (Eigen::Index i = 0; i < nt; ++i) x(i) = tanh_solution(u(0, j), t(i), opt.a, opt.b);
    set.y.push_back(t.transpose());
    set.values[0].push_back(std::move(x));
  }
  return set;
}

namespace {

Eigen::VectorXd tc4_axis(const Tc4Options& opt) {
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(opt.grid), -opt.half_width, opt.half_width);
}

}  // namespace

SnapshotMatrix tc4_snapshots(const Tc4Options& opt) {
  const Eigen::VectorXd axis = tc4_axis(opt);
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(opt.times), 0.0, opt.params.t_end);
  const RigidBodyParams params = opt.params;
  return assemble_time_matrix([&](double x, double y, double tt) { return rigid_body_field(x, y, tt, params); }, axis,
                              axis, t);
}

PointData tc4_training_points(const Tc4Options& opt, std::uint64_t seed) {
  Rng rng = stream_rng(seed, "tc4/points");
  const auto n = static_cast<Eigen::Index>(opt.train_points);
  PointData out;
  out.variables = {"z"};
  out.u.resize(1, n);
  out.y.resize(2, n);
  out.values.resize(1, n);
  const double w = opt.train_half_width;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.u(0, k) = rng.uniform(0.0, opt.params.t_end);
    out.y(0, k) = rng.uniform(-w, w);
    out.y(1, k) = rng.uniform(-w, w);
    out.values(0, k) = rigid_body_field(out.y(0, k), out.y(1, k), out.u(0, k), opt.params);
  }
  return out;
}

GridData tc4_grid(const Tc4Options& opt, const Eigen::VectorXd& times) {
  const Eigen::VectorXd axis = tc4_axis(opt);
  GridData out;
  out.variables = {"z"};
  out.u = times.transpose();
  out.y = grid_points(axis, axis);
  Eigen::MatrixXd values(out.y.cols(), times.size());
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    for (Eigen::Index r = 0; r < out.y.cols(); ++r) values(r, k) = rigid_body_field(out.y(0, r), out.y(1, r), times(k), opt.params);
  }
  out.values.push_back(std::move(values));
  return out;
}

}  // namespace opnet
