#include "opnet/deeponet.hpp"

#include <cmath>
#include <span>
#include <string>
#include <utility>

#include "opnet/errors.hpp"
#include "opnet/rng.hpp"

namespace opnet {

VanillaDeepONet::VanillaDeepONet(std::vector<std::string> variables, InputScaling scaling,
                                 std::vector<OperatorHead> heads)
    : variables_(std::move(variables)), scaling_(std::move(scaling)), heads_(std::move(heads)) {
  if (heads_.empty() || heads_.size() != variables_.size()) {
    throw Error(ErrorKind::InvalidShape, "one branch/trunk head per variable is required");
  }
  const Eigen::Index p = heads_.front().branch.output_dim();
  for (const auto& h : heads_) {
    if (h.branch.output_dim() != p || h.trunk.output_dim() != p) {
      throw Error(ErrorKind::InvalidShape, "branch and trunk outputs must all equal p");
    }
    if (h.branch.input_dim() != scaling_.u.features() || h.trunk.input_dim() != scaling_.y.features()) {
      throw Error(ErrorKind::InvalidShape, "network input dims do not match the input scaling");
    }
  }
}

VanillaDeepONet VanillaDeepONet::init(std::vector<std::string> variables, Eigen::Index u_dim, Eigen::Index y_dim,
                                      const VanillaSpec& spec, InputScaling scaling, std::uint64_t seed) {
  if (spec.p < 1) throw Error(ErrorKind::InvalidShape, "p must be positive");
  std::vector<OperatorHead> heads;
  for (const auto& name : variables) {
    Rng rng = stream_rng(seed, "init/" + name);
    OperatorHead h;
    h.branch = DenseNet::glorot(static_cast<int>(u_dim), spec.p, spec.branch, rng);
    h.trunk = DenseNet::glorot(static_cast<int>(y_dim), spec.p, spec.trunk, rng);
    heads.push_back(std::move(h));
  }
  return VanillaDeepONet(std::move(variables), std::move(scaling), std::move(heads));
}

void VanillaDeepONet::check_dims(Eigen::Index u_rows, Eigen::Index y_rows) const {
  if (u_rows != scaling_.u.features() || y_rows != scaling_.y.features()) {
    throw Error(ErrorKind::InvalidShape, "input dims (" + std::to_string(u_rows) + ", " + std::to_string(y_rows) +
                                             ") do not match the model (" + std::to_string(scaling_.u.features()) +
                                             ", " + std::to_string(scaling_.y.features()) + ")");
  }
}

Eigen::VectorXd VanillaDeepONet::forward(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const {
  check_dims(u.size(), y.size());
  const Eigen::VectorXd us = scaling_.u.transform(u);
  const Eigen::VectorXd ys = scaling_.y.transform(y);
  Eigen::VectorXd out(static_cast<Eigen::Index>(heads_.size()));
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const auto& h = heads_[v];
    out(static_cast<Eigen::Index>(v)) = h.branch.forward(us).dot(h.trunk.forward(ys)) + h.bias;
  }
  return out;
}

Eigen::MatrixXd VanillaDeepONet::predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const {
  check_dims(u.rows(), y.rows());
  if (u.cols() != y.cols()) throw Error(ErrorKind::InvalidShape, "u and y must have the same sample count");
  const Eigen::MatrixXd us = scaling_.u.transform(u);
  const Eigen::MatrixXd ys = scaling_.y.transform(y);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(heads_.size()), u.cols());
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const auto& h = heads_[v];
    const Eigen::MatrixXd b = h.branch.forward_batch(us);
    const Eigen::MatrixXd psi = h.trunk.forward_batch(ys);
    out.row(static_cast<Eigen::Index>(v)) = (b.array() * psi.array()).colwise().sum() + h.bias;
  }
  return out;
}

Eigen::MatrixXd VanillaDeepONet::predict_grid(std::size_t variable, const Eigen::MatrixXd& u,
                                              const Eigen::MatrixXd& y) const {
  check_dims(u.rows(), y.rows());
  const auto& h = heads_.at(variable);
  const Eigen::MatrixXd b = h.branch.forward_batch(scaling_.u.transform(u));
  const Eigen::MatrixXd psi = h.trunk.forward_batch(scaling_.y.transform(y));
  return (psi.transpose() * b).array() + h.bias;
}

int VanillaDeepONet::p() const { return heads_.empty() ? 0 : static_cast<int>(heads_.front().branch.output_dim()); }

std::size_t VanillaDeepONet::param_count() const {
  std::size_t n = 0;
  for (const auto& h : heads_) n += h.branch.param_count() + h.trunk.param_count() + 1;
  return n;
}

namespace {

// One head trained on a (y, scenario) grid. A sample is a scenario; its loss
// covers every grid point. With `train_trunk` false the trunk output is
// computed once and only branch + bias are exposed as parameters.
class GridHeadProblem {
 public:
  GridHeadProblem(OperatorHead& head, Eigen::MatrixXd u, Eigen::MatrixXd y, const Eigen::MatrixXd& values,
                  bool train_trunk)
      : head_(head), u_(std::move(u)), y_(std::move(y)), values_(values), train_trunk_(train_trunk) {
    nb_ = head_.branch.param_count();
    nt_ = train_trunk_ ? head_.trunk.param_count() : 0;
    if (!train_trunk_) psi_ = head_.trunk.forward_batch(y_);
  }

  std::size_t sample_count() const { return static_cast<std::size_t>(u_.cols()); }

  Eigen::VectorXd parameters() const {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(nb_ + nt_ + 1));
    theta.head(static_cast<Eigen::Index>(nb_)) = head_.branch.parameters();
    if (train_trunk_) theta.segment(static_cast<Eigen::Index>(nb_), static_cast<Eigen::Index>(nt_)) = head_.trunk.parameters();
    theta(theta.size() - 1) = head_.bias;
    return theta;
  }

  void set_parameters(const Eigen::VectorXd& theta) {
    head_.branch.set_parameters(theta.head(static_cast<Eigen::Index>(nb_)));
    if (train_trunk_) head_.trunk.set_parameters(theta.segment(static_cast<Eigen::Index>(nb_), static_cast<Eigen::Index>(nt_)));
    head_.bias = theta(theta.size() - 1);
  }

  double loss_and_grad(std::span<const std::size_t> batch, Eigen::VectorXd& grad) const {
    const Eigen::MatrixXd ub = gather_columns(u_, batch);
    const Eigen::MatrixXd vb = gather_columns(values_, batch);
    ForwardTape bt, tt;
    const Eigen::MatrixXd& b = head_.branch.forward_batch(ub, bt);
    const Eigen::MatrixXd& psi = train_trunk_ ? head_.trunk.forward_batch(y_, tt) : psi_;
    const Eigen::MatrixXd r = ((psi.transpose() * b).array() + head_.bias).matrix() - vb;
    const double scale = 1.0 / static_cast<double>(r.size());
    const Eigen::MatrixXd d_pred = (2.0 * scale) * r;
    const Eigen::MatrixXd d_b = psi * d_pred;
    head_.branch.backward(bt, d_b, grad.head(static_cast<Eigen::Index>(nb_)), false);
    if (train_trunk_) {
      const Eigen::MatrixXd d_psi = b * d_pred.transpose();
      head_.trunk.backward(tt, d_psi, grad.segment(static_cast<Eigen::Index>(nb_), static_cast<Eigen::Index>(nt_)),
                           false);
    }
    grad(grad.size() - 1) += d_pred.sum();
    return r.squaredNorm() * scale;
  }

  double loss(std::span<const std::size_t> batch) const {
    const Eigen::MatrixXd b = head_.branch.forward_batch(gather_columns(u_, batch));
    const Eigen::MatrixXd psi = train_trunk_ ? head_.trunk.forward_batch(y_) : psi_;
    const Eigen::MatrixXd r = ((psi.transpose() * b).array() + head_.bias).matrix() - gather_columns(values_, batch);
    return r.squaredNorm() / static_cast<double>(r.size());
  }

 private:
  OperatorHead& head_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd y_;
  const Eigen::MatrixXd& values_;
  bool train_trunk_;
  Eigen::MatrixXd psi_;
  std::size_t nb_ = 0;
  std::size_t nt_ = 0;
};

// One head trained on pointwise samples.
class PointHeadProblem {
 public:
  PointHeadProblem(OperatorHead& head, Eigen::MatrixXd u, Eigen::MatrixXd y, Eigen::RowVectorXd values)
      : head_(head), u_(std::move(u)), y_(std::move(y)), values_(std::move(values)) {
    nb_ = head_.branch.param_count();
    nt_ = head_.trunk.param_count();
  }

  std::size_t sample_count() const { return static_cast<std::size_t>(u_.cols()); }

  Eigen::VectorXd parameters() const {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(nb_ + nt_ + 1));
    theta << head_.branch.parameters(), head_.trunk.parameters(), head_.bias;
    return theta;
  }

  void set_parameters(const Eigen::VectorXd& theta) {
    head_.branch.set_parameters(theta.head(static_cast<Eigen::Index>(nb_)));
    head_.trunk.set_parameters(theta.segment(static_cast<Eigen::Index>(nb_), static_cast<Eigen::Index>(nt_)));
    head_.bias = theta(theta.size() - 1);
  }

  double loss_and_grad(std::span<const std::size_t> batch, Eigen::VectorXd& grad) const {
    ForwardTape bt, tt;
    const Eigen::MatrixXd& b = head_.branch.forward_batch(gather_columns(u_, batch), bt);
    const Eigen::MatrixXd& psi = head_.trunk.forward_batch(gather_columns(y_, batch), tt);
    const Eigen::RowVectorXd r = (b.array() * psi.array()).colwise().sum().matrix().array() + head_.bias -
                                 gather_columns(values_, batch).array();
    const double scale = 1.0 / static_cast<double>(r.size());
    const Eigen::RowVectorXd d_pred = (2.0 * scale) * r;
    const Eigen::MatrixXd d_b = psi.array().rowwise() * d_pred.array();
    const Eigen::MatrixXd d_psi = b.array().rowwise() * d_pred.array();
    head_.branch.backward(bt, d_b, grad.head(static_cast<Eigen::Index>(nb_)), false);
    head_.trunk.backward(tt, d_psi, grad.segment(static_cast<Eigen::Index>(nb_), static_cast<Eigen::Index>(nt_)),
                         false);
    grad(grad.size() - 1) += d_pred.sum();
    return r.squaredNorm() * scale;
  }

  double loss(std::span<const std::size_t> batch) const {
    const Eigen::MatrixXd b = head_.branch.forward_batch(gather_columns(u_, batch));
    const Eigen::MatrixXd psi = head_.trunk.forward_batch(gather_columns(y_, batch));
    const Eigen::RowVectorXd r =
        (b.array() * psi.array()).colwise().sum().matrix().array() + head_.bias - gather_columns(values_, batch).array();
    return r.squaredNorm() / static_cast<double>(r.size());
  }

 private:
  OperatorHead& head_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd y_;
  Eigen::RowVectorXd values_;
  std::size_t nb_ = 0;
  std::size_t nt_ = 0;
};

TrainConfig variable_config(const TrainConfig& cfg, const std::string& name) {
  TrainConfig out = cfg;
  out.seed = derive_seed(cfg.seed, "variable/" + name);
  return out;
}

}  // namespace

Fitted<VanillaDeepONet> vanilla_fit(const GridData& data, const VanillaSpec& spec, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  InputScaling scaling = InputScaling::fit(data.u, data.y);
  Fitted<VanillaDeepONet> out{
      VanillaDeepONet::init(data.variables, data.u.rows(), data.y.rows(), spec, scaling, cfg.seed), {}};
  const Eigen::MatrixXd us = scaling.u.transform(data.u);
  const Eigen::MatrixXd ys = scaling.y.transform(data.y);
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    OperatorHead& head = out.model.head(v);
    head.bias = data.values[v].mean();
    GridHeadProblem problem(head, us, ys, data.values[v], true);
    out.runs.push_back(train_problem(problem, variable_config(cfg, data.variables[v])));
  }
  return out;
}

Fitted<VanillaDeepONet> vanilla_fit(const PointData& data, const VanillaSpec& spec, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  InputScaling scaling = InputScaling::fit(data.u, data.y);
  Fitted<VanillaDeepONet> out{
      VanillaDeepONet::init(data.variables, data.u.rows(), data.y.rows(), spec, scaling, cfg.seed), {}};
  const Eigen::MatrixXd us = scaling.u.transform(data.u);
  const Eigen::MatrixXd ys = scaling.y.transform(data.y);
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    OperatorHead& head = out.model.head(v);
    const Eigen::RowVectorXd values = data.values.row(static_cast<Eigen::Index>(v));
    head.bias = values.mean();
    PointHeadProblem problem(head, us, ys, values);
    out.runs.push_back(train_problem(problem, variable_config(cfg, data.variables[v])));
  }
  return out;
}

std::vector<TrainResult> fit_branches(VanillaDeepONet& model, const GridData& data, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  if (data.variables != model.variables()) throw Error(ErrorKind::InvalidShape, "variable list mismatch");
  const Eigen::MatrixXd us = model.scaling().u.transform(data.u);
  const Eigen::MatrixXd ys = model.scaling().y.transform(data.y);
  std::vector<TrainResult> runs;
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    GridHeadProblem problem(model.head(v), us, ys, data.values[v], false);
    runs.push_back(train_problem(problem, variable_config(cfg, "branch/" + data.variables[v])));
  }
  return runs;
}

Fitted<VanillaDeepONet> pod_fit_trunks(const GridData& data, const PodSpec& spec, const TrainConfig& trunk_cfg) {
  data.validate();
  trunk_cfg.validate();
  if (spec.r < 1) throw Error(ErrorKind::InvalidRank, "r must be positive");
  InputScaling scaling = InputScaling::fit(data.u, data.y);
  const VanillaSpec vspec{spec.r, spec.branch, spec.trunk};
  Fitted<VanillaDeepONet> out{
      VanillaDeepONet::init(data.variables, data.u.rows(), data.y.rows(), vspec, scaling, trunk_cfg.seed), {}};
  const Eigen::MatrixXd ys = scaling.y.transform(data.y);
  const double root_t = std::sqrt(static_cast<double>(data.points()));
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    const Decomposition dec = svd(data.values[v]);
    if (spec.r > dec.rank()) {
      throw Error(ErrorKind::InvalidRank, "r = " + std::to_string(spec.r) + " exceeds the snapshot rank " +
                                              std::to_string(dec.rank()));
    }
    // Unit-RMS modes keep the regression targets O(1).
    const Eigen::MatrixXd modes = dec.U.leftCols(spec.r) * root_t;
    OperatorHead& head = out.model.head(v);
    // the modes are uncentered, so the offset starts at zero
    head.bias = 0.0;
    out.runs.push_back(train(head.trunk, {ys, modes.transpose()}, variable_config(trunk_cfg, "trunk/" + data.variables[v])));
  }
  return out;
}

Fitted<VanillaDeepONet> pod_deeponet_fit(const GridData& data, const PodSpec& spec, const TrainConfig& trunk_cfg,
                                         const TrainConfig& branch_cfg) {
  auto out = pod_fit_trunks(data, spec, trunk_cfg);
  auto runs = fit_branches(out.model, data, branch_cfg);
  out.runs.insert(out.runs.end(), runs.begin(), runs.end());
  return out;
}

Fitted<VanillaDeepONet> pod_deeponet_fit(const SnapshotMatrix& snapshots, int r, const PodSpec& spec,
                                         const TrainConfig& trunk_cfg, const TrainConfig& branch_cfg) {
  PodSpec s = spec;
  s.r = r;
  return pod_deeponet_fit(grid_from_snapshots({snapshots}, {"value"}), s, trunk_cfg, branch_cfg);
}

}  // namespace opnet
