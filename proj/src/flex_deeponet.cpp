#include "opnet/flex_deeponet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>

#include "opnet/errors.hpp"
#include "opnet/rng.hpp"

namespace opnet {

Eigen::MatrixXd rotation_matrix(double angle, Eigen::Index y_dim) {
  if (y_dim == 1) return Eigen::MatrixXd::Identity(1, 1);
  if (y_dim != 2) throw Error(ErrorKind::InvalidShape, "rotations are only defined for 1 or 2 coordinates");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::MatrixXd r(2, 2);
  r << c, -s, s, c;
  return r;
}

Eigen::VectorXd prenet_transform(const Frame& frame, const Eigen::VectorXd& y) {
  Eigen::VectorXd out = frame.scale * (rotation_matrix(frame.angle, y.size()) * y);
  if (frame.shift.size() != 0) {
    if (frame.shift.size() != y.size()) throw Error(ErrorKind::InvalidShape, "shift and y differ in length");
    out += frame.shift;
  }
  return out;
}

PreNet::PreNet(PreNetLayout layout, std::vector<DenseNet> nets) : layout_(layout), nets_(std::move(nets)) {
  Eigen::Index rows = 0;
  for (const auto& n : nets_) rows += n.output_dim();
  if (rows != layout_.size()) throw Error(ErrorKind::InvalidShape, "Pre-Net outputs do not match the layout");
  for (const auto& n : nets_) {
    if (n.input_dim() != nets_.front().input_dim()) throw Error(ErrorKind::InvalidShape, "Pre-Net input dims differ");
  }
}

PreNet PreNet::init(const PreNetSpec& spec, Eigen::Index u_dim, Eigen::Index y_dim, std::size_t n_variables,
                    Rng& rng) {
  PreNetLayout layout;
  if (spec.stretch) layout.stretches = spec.per_variable_stretch ? static_cast<Eigen::Index>(n_variables) : 1;
  if (spec.rotate) {
    if (y_dim != 2) throw Error(ErrorKind::InvalidShape, "rotation needs exactly two trunk coordinates");
    layout.angles = 1;
  }
  if (spec.shift) layout.shifts = y_dim;

  std::vector<Eigen::Index> outputs;
  if (spec.separate_nets) {
    for (Eigen::Index n : {layout.stretches, layout.angles, layout.shifts}) {
      if (n > 0) outputs.push_back(n);
    }
  } else if (layout.size() > 0) {
    outputs.push_back(layout.size());
  }
  std::vector<DenseNet> nets;
  for (auto n : outputs) {
    DenseNet net = DenseNet::glorot(static_cast<int>(u_dim), static_cast<int>(n), spec.net, rng);
    auto& last = net.layer(net.depth() - 1);
    last.weight.setZero();
    last.bias.setZero();
    nets.push_back(std::move(net));
  }
  return PreNet(layout, std::move(nets));
}

Eigen::MatrixXd PreNet::raw(const Eigen::MatrixXd& u) const {
  Eigen::MatrixXd out(layout_.size(), u.cols());
  Eigen::Index row = 0;
  for (const auto& n : nets_) {
    out.middleRows(row, n.output_dim()) = n.forward_batch(u);
    row += n.output_dim();
  }
  return out;
}

Frame PreNet::frame(const Eigen::VectorXd& raw_column, std::size_t variable, Eigen::Index y_dim) const {
  Frame f;
  if (layout_.stretches > 0) {
    const Eigen::Index k = layout_.stretches == 1 ? 0 : static_cast<Eigen::Index>(variable);
    f.scale = std::exp(raw_column(k));
  }
  if (layout_.angles > 0) f.angle = raw_column(layout_.angle_offset());
  f.shift = layout_.shifts > 0 ? Eigen::VectorXd(raw_column.segment(layout_.shift_offset(), layout_.shifts))
                               : Eigen::VectorXd::Zero(y_dim);
  return f;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> PreNet::net_rows() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> rows;
  Eigen::Index row = 0;
  for (const auto& n : nets_) {
    rows.emplace_back(row, n.output_dim());
    row += n.output_dim();
  }
  return rows;
}

std::size_t PreNet::param_count() const {
  std::size_t n = 0;
  for (const auto& net : nets_) n += net.param_count();
  return n;
}

FlexDeepONet::FlexDeepONet(std::vector<std::string> variables, InputScaling scaling, PreNet prenet,
                           std::vector<FlexHead> heads, std::vector<MinMaxScaler> target_scaling)
    : variables_(std::move(variables)),
      scaling_(std::move(scaling)),
      prenet_(std::move(prenet)),
      heads_(std::move(heads)),
      target_scaling_(std::move(target_scaling)) {
  const std::size_t nvar = variables_.size();
  if (nvar == 0 || heads_.size() != nvar || target_scaling_.size() != nvar) {
    throw Error(ErrorKind::InvalidShape, "one head and one target scaler per variable is required");
  }
  const Eigen::Index p = heads_.front().trunk.output_dim();
  const Eigen::Index du = scaling_.u.features();
  const Eigen::Index dy = scaling_.y.features();
  for (std::size_t v = 0; v < nvar; ++v) {
    const auto& h = heads_[v];
    if (h.trunk.output_dim() != p || h.branch.output_dim() != p + 1) {
      throw Error(ErrorKind::InvalidShape, "trunk needs p outputs and branch p + 1");
    }
    if (h.branch.input_dim() != du || h.trunk.input_dim() != dy) {
      throw Error(ErrorKind::InvalidShape, "network input dims do not match the input scaling");
    }
    if (target_scaling_[v].features() != 1) throw Error(ErrorKind::InvalidShape, "target scalers are scalar");
  }
  const auto& l = prenet_.layout();
  if ((l.shifts != 0 && l.shifts != dy) || (l.angles != 0 && dy != 2) ||
      (l.stretches > 1 && l.stretches != static_cast<Eigen::Index>(nvar))) {
    throw Error(ErrorKind::InvalidShape, "Pre-Net layout does not fit the coordinates or variables");
  }
  if (!prenet_.nets().empty() && prenet_.nets().front().input_dim() != du) {
    throw Error(ErrorKind::InvalidShape, "Pre-Net input dim does not match u");
  }
}

FlexDeepONet FlexDeepONet::init(std::vector<std::string> variables, Eigen::Index u_dim, Eigen::Index y_dim,
                                const FlexSpec& spec, InputScaling scaling, std::vector<MinMaxScaler> target_scaling,
                                std::uint64_t seed) {
  if (spec.p < 1) throw Error(ErrorKind::InvalidShape, "p must be positive");
  Rng pre_rng = stream_rng(seed, "init/prenet");
  PreNet prenet = PreNet::init(spec.prenet, u_dim, y_dim, variables.size(), pre_rng);
  std::vector<FlexHead> heads;
  for (const auto& name : variables) {
    Rng rng = stream_rng(seed, "init/" + name);
    heads.push_back({DenseNet::glorot(static_cast<int>(u_dim), spec.p + 1, spec.branch, rng),
                     DenseNet::glorot(static_cast<int>(y_dim), spec.p, spec.trunk, rng)});
  }
  return FlexDeepONet(std::move(variables), std::move(scaling), std::move(prenet), std::move(heads),
                      std::move(target_scaling));
}

void FlexDeepONet::check_dims(Eigen::Index u_rows, Eigen::Index y_rows) const {
  if (u_rows != scaling_.u.features() || y_rows != scaling_.y.features()) {
    throw Error(ErrorKind::InvalidShape, "input dims (" + std::to_string(u_rows) + ", " + std::to_string(y_rows) +
                                             ") do not match the model (" + std::to_string(scaling_.u.features()) +
                                             ", " + std::to_string(scaling_.y.features()) + ")");
  }
}

int FlexDeepONet::p() const { return heads_.empty() ? 0 : static_cast<int>(heads_.front().trunk.output_dim()); }

std::size_t FlexDeepONet::param_count() const {
  std::size_t n = prenet_.param_count();
  for (const auto& h : heads_) n += h.branch.param_count() + h.trunk.param_count();
  return n;
}

Eigen::VectorXd FlexDeepONet::parameters() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(param_count()));
  Eigen::Index off = 0;
  auto put = [&](const DenseNet& n) {
    const auto k = static_cast<Eigen::Index>(n.param_count());
    theta.segment(off, k) = n.parameters();
    off += k;
  };
  for (const auto& n : prenet_.nets()) put(n);
  for (const auto& h : heads_) {
    put(h.branch);
    put(h.trunk);
  }
  return theta;
}

void FlexDeepONet::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != static_cast<Eigen::Index>(param_count())) {
    throw Error(ErrorKind::InvalidShape, "parameter vector has the wrong length");
  }
  Eigen::Index off = 0;
  auto take = [&](DenseNet& n) {
    const auto k = static_cast<Eigen::Index>(n.param_count());
    n.set_parameters(theta.segment(off, k));
    off += k;
  };
  for (auto& n : prenet_.nets()) take(n);
  for (auto& h : heads_) {
    take(h.branch);
    take(h.trunk);
  }
}

namespace {

// Per-sample frame quantities of one variable, stored column-wise.
struct BatchFrame {
  Eigen::RowVectorXd scale;
  Eigen::RowVectorXd angle;
  Eigen::MatrixXd rotated;  // R(angle) * y, before stretch and shift
  Eigen::MatrixXd moved;    // trunk input
};

BatchFrame apply_frame(const PreNetLayout& layout, const Eigen::MatrixXd& raw, std::size_t variable,
                       const Eigen::MatrixXd& ys) {
  const Eigen::Index n = ys.cols();
  BatchFrame f;
  if (layout.stretches > 0) {
    const Eigen::Index k = layout.stretches == 1 ? 0 : static_cast<Eigen::Index>(variable);
    f.scale = raw.row(k).array().exp();
  } else {
    f.scale = Eigen::RowVectorXd::Ones(n);
  }
  if (layout.angles > 0) {
    f.angle = raw.row(layout.angle_offset());
    const Eigen::ArrayXXd c = f.angle.array().cos();
    const Eigen::ArrayXXd s = f.angle.array().sin();
    f.rotated.resize(2, n);
    f.rotated.row(0) = c * ys.row(0).array() - s * ys.row(1).array();
    f.rotated.row(1) = s * ys.row(0).array() + c * ys.row(1).array();
  } else {
    f.angle = Eigen::RowVectorXd::Zero(n);
    f.rotated = ys;
  }
  f.moved = f.rotated.array().rowwise() * f.scale.array();
  if (layout.shifts > 0) f.moved += raw.middleRows(layout.shift_offset(), layout.shifts);
  return f;
}

}  // namespace

Eigen::MatrixXd FlexDeepONet::predict_scaled(const Eigen::MatrixXd& us, const Eigen::MatrixXd& ys) const {
  const Eigen::MatrixXd raw = prenet_.raw(us);
  const Eigen::Index p = this->p();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(heads_.size()), us.cols());
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const BatchFrame f = apply_frame(prenet_.layout(), raw, v, ys);
    const Eigen::MatrixXd psi = heads_[v].trunk.forward_batch(f.moved);
    const Eigen::MatrixXd b = heads_[v].branch.forward_batch(us);
    out.row(static_cast<Eigen::Index>(v)) = (b.topRows(p).array() * psi.array()).colwise().sum() + b.row(p).array();
  }
  return out;
}

Eigen::VectorXd FlexDeepONet::forward(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const {
  check_dims(u.size(), y.size());
  return predict(u, y).col(0);
}

Eigen::MatrixXd FlexDeepONet::predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const {
  check_dims(u.rows(), y.rows());
  if (u.cols() != y.cols()) throw Error(ErrorKind::InvalidShape, "u and y must have the same sample count");
  Eigen::MatrixXd out = predict_scaled(scaling_.u.transform(u), scaling_.y.transform(y));
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const auto row = static_cast<Eigen::Index>(v);
    out.row(row) = target_scaling_[v].inverse(out.row(row));
  }
  return out;
}

std::vector<Frame> FlexDeepONet::frames(const Eigen::MatrixXd& u, std::size_t variable) const {
  check_dims(u.rows(), scaling_.y.features());
  if (variable >= heads_.size()) throw Error(ErrorKind::InvalidShape, "unknown variable index");
  const Eigen::MatrixXd raw = prenet_.raw(scaling_.u.transform(u));
  std::vector<Frame> out;
  for (Eigen::Index j = 0; j < u.cols(); ++j) out.push_back(prenet_.frame(raw.col(j), variable, scaling_.y.features()));
  return out;
}

double FlexDeepONet::loss_and_grad(const Eigen::MatrixXd& us, const Eigen::MatrixXd& ys,
                                   const Eigen::MatrixXd& targets, Eigen::VectorXd* grad) const {
  const Eigen::Index n = us.cols();
  const auto nvar = static_cast<Eigen::Index>(heads_.size());
  if (n == 0) throw Error(ErrorKind::InvalidData, "empty batch");
  if (targets.rows() != nvar || targets.cols() != n || ys.cols() != n) {
    throw Error(ErrorKind::InvalidShape, "batch shapes do not match");
  }
  const auto& layout = prenet_.layout();
  const auto& pre_nets = prenet_.nets();
  const Eigen::Index p = this->p();

  std::vector<ForwardTape> pre_tapes(pre_nets.size());
  Eigen::MatrixXd raw(layout.size(), n);
  const auto rows = prenet_.net_rows();
  for (std::size_t k = 0; k < pre_nets.size(); ++k) {
    raw.middleRows(rows[k].first, rows[k].second) = pre_nets[k].forward_batch(us, pre_tapes[k]);
  }
  Eigen::MatrixXd d_raw = Eigen::MatrixXd::Zero(layout.size(), n);

  const double norm = 1.0 / static_cast<double>(n * nvar);
  double loss = 0.0;
  Eigen::Index off = static_cast<Eigen::Index>(prenet_.param_count());
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const auto& h = heads_[v];
    const BatchFrame f = apply_frame(layout, raw, v, ys);
    ForwardTape bt, tt;
    const Eigen::MatrixXd& b = h.branch.forward_batch(us, bt);
    const Eigen::MatrixXd& psi = h.trunk.forward_batch(f.moved, tt);
    const Eigen::RowVectorXd r = (b.topRows(p).array() * psi.array()).colwise().sum() + b.row(p).array() -
                                 targets.row(static_cast<Eigen::Index>(v)).array();
    loss += r.squaredNorm() * norm;
    const auto nb = static_cast<Eigen::Index>(h.branch.param_count());
    const auto nt = static_cast<Eigen::Index>(h.trunk.param_count());
    if (grad == nullptr) {
      off += nb + nt;
      continue;
    }
    const Eigen::RowVectorXd d_pred = (2.0 * norm) * r;
    Eigen::MatrixXd d_b(p + 1, n);
    d_b.topRows(p) = psi.array().rowwise() * d_pred.array();
    d_b.row(p) = d_pred;
    const Eigen::MatrixXd d_psi = b.topRows(p).array().rowwise() * d_pred.array();
    h.branch.backward(bt, d_b, grad->segment(off, nb), false);
    off += nb;
    const bool need_frame_grad = layout.size() > 0;
    const Eigen::MatrixXd d_moved = h.trunk.backward(tt, d_psi, grad->segment(off, nt), need_frame_grad);
    off += nt;
    if (!need_frame_grad) continue;

    if (layout.shifts > 0) d_raw.middleRows(layout.shift_offset(), layout.shifts) += d_moved;
    if (layout.stretches > 0) {
      const Eigen::Index k = layout.stretches == 1 ? 0 : static_cast<Eigen::Index>(v);
      d_raw.row(k).array() += f.scale.array() * (d_moved.array() * f.rotated.array()).colwise().sum();
    }
    if (layout.angles > 0) {
      // d(R y)/d angle = (-(R y)_1, (R y)_0)
      d_raw.row(layout.angle_offset()).array() +=
          f.scale.array() *
          (d_moved.row(1).array() * f.rotated.row(0).array() - d_moved.row(0).array() * f.rotated.row(1).array());
    }
  }
  if (grad != nullptr) {
    Eigen::Index pre_off = 0;
    for (std::size_t k = 0; k < pre_nets.size(); ++k) {
      const auto np = static_cast<Eigen::Index>(pre_nets[k].param_count());
      pre_nets[k].backward(pre_tapes[k], d_raw.middleRows(rows[k].first, rows[k].second), grad->segment(pre_off, np),
                           false);
      pre_off += np;
    }
  }
  return loss;
}

namespace {

class FlexProblem {
 public:
  FlexProblem(FlexDeepONet& model, Eigen::MatrixXd us, Eigen::MatrixXd ys, Eigen::MatrixXd targets)
      : model_(model), us_(std::move(us)), ys_(std::move(ys)), targets_(std::move(targets)) {}

  std::size_t sample_count() const { return static_cast<std::size_t>(us_.cols()); }
  Eigen::VectorXd parameters() const { return model_.parameters(); }
  void set_parameters(const Eigen::VectorXd& theta) { model_.set_parameters(theta); }

  double loss_and_grad(std::span<const std::size_t> batch, Eigen::VectorXd& grad) const {
    return model_.loss_and_grad(gather_columns(us_, batch), gather_columns(ys_, batch), gather_columns(targets_, batch),
                                &grad);
  }
  double loss(std::span<const std::size_t> batch) const {
    return model_.loss_and_grad(gather_columns(us_, batch), gather_columns(ys_, batch), gather_columns(targets_, batch),
                                nullptr);
  }

 private:
  FlexDeepONet& model_;
  Eigen::MatrixXd us_;
  Eigen::MatrixXd ys_;
  Eigen::MatrixXd targets_;
};

}  // namespace

Fitted<FlexDeepONet> flex_fit(const PointData& data, const FlexSpec& spec, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
  data.validate();
  cfg.validate();
  InputScaling scaling = InputScaling::fit(data.u, data.y);
  std::vector<MinMaxScaler> target_scaling;
  Eigen::MatrixXd targets(data.values.rows(), data.values.cols());
  for (Eigen::Index v = 0; v < data.values.rows(); ++v) {
    target_scaling.push_back(spec.scale_targets ? MinMaxScaler::fit(data.values.row(v), -1.0, 1.0)
                                                : MinMaxScaler::identity(1));
    targets.row(v) = target_scaling.back().transform(data.values.row(v));
  }
  Fitted<FlexDeepONet> out{FlexDeepONet::init(data.variables, data.u.rows(), data.y.rows(), spec, scaling,
                                              target_scaling, cfg.seed),
                           {}};
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    auto& last = out.model.head(v).branch.layer(out.model.head(v).branch.depth() - 1);
    last.bias(spec.p) = targets.row(static_cast<Eigen::Index>(v)).mean();
  }
  const Eigen::MatrixXd us = scaling.u.transform(data.u);
  const Eigen::MatrixXd ys = scaling.y.transform(data.y);
  FlexProblem problem(out.model, us, ys, std::move(targets));
  out.runs.push_back(train_problem(problem, cfg, on_epoch));
  return out;
}

AlignmentReport alignment_diagnostics(const FlexDeepONet& model, const Eigen::MatrixXd& u, const Eigen::MatrixXd& y,
                                      std::size_t variable) {
  const auto frames = model.frames(u, variable);
  const Eigen::MatrixXd ys = model.scaling().y.transform(y);
  const Eigen::MatrixXd b = model.heads().at(variable).branch.forward_batch(model.scaling().u.transform(u));
  const auto& ts = model.target_scaling().at(variable);
  const double gain = ts.gain()(0) != 0.0 ? ts.gain()(0) : 1.0;
  const Eigen::Index p = model.p();
  AlignmentReport report;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    AlignmentRow row;
    row.u = u.col(j);
    row.frame = frames[static_cast<std::size_t>(j)];
    row.centering = (b(p, j) - ts.offset()(0)) / gain;
    row.amplitude = p == 1 ? b(0, j) / gain : 1.0;
    Eigen::MatrixXd moved(ys.rows(), ys.cols());
    for (Eigen::Index i = 0; i < ys.cols(); ++i) moved.col(i) = prenet_transform(row.frame, ys.col(i));
    report.transformed.push_back(std::move(moved));
    report.rows.push_back(std::move(row));
  }
  return report;
}

double curve_spread(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values, int samples) {
  if (coords.rows() != values.rows() || coords.cols() != values.cols() || coords.rows() < 2 || coords.cols() < 2) {
    throw Error(ErrorKind::InvalidShape, "need at least two curves of two points each");
  }
  if (samples < 2) throw Error(ErrorKind::InvalidShape, "need at least two sample points");
  const Eigen::Index t = coords.rows();
  const Eigen::Index s = coords.cols();
  std::vector<std::vector<std::pair<double, double>>> curves(static_cast<std::size_t>(s));
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < s; ++j) {
    auto& c = curves[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < t; ++i) c.emplace_back(coords(i, j), values(i, j));
    std::sort(c.begin(), c.end());
    lo = std::max(lo, c.front().first);
    hi = std::min(hi, c.back().first);
  }
  if (!(hi > lo)) throw Error(ErrorKind::InvalidData, "curves share no coordinate range");

  auto interp = [](const std::vector<std::pair<double, double>>& c, double x) {
    auto it = std::lower_bound(c.begin(), c.end(), std::make_pair(x, -std::numeric_limits<double>::infinity()));
    if (it == c.begin()) return it->second;
    if (it == c.end()) return c.back().second;
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return x1 == x0 ? y1 : y0 + (y1 - y0) * (x - x0) / (x1 - x0);
  };
  double total = 0.0;
  Eigen::VectorXd at(s);
  for (int k = 0; k < samples; ++k) {
    const double x = lo + (hi - lo) * k / (samples - 1);
    for (Eigen::Index j = 0; j < s; ++j) at(j) = interp(curves[static_cast<std::size_t>(j)], x);
    total += std::sqrt((at.array() - at.mean()).square().mean());
  }
  return total / samples;
}

}  // namespace opnet
