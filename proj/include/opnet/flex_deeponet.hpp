#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opnet/deeponet.hpp"
#include "opnet/nn.hpp"
#include "opnet/operator_data.hpp"
#include "opnet/scaler.hpp"
#include "opnet/train.hpp"

namespace opnet {

/// Which frame components the Pre-Net produces and how it is laid out.
struct PreNetSpec {
  bool stretch = false;
  bool rotate = false;
  bool shift = true;
  /// One subnet per enabled component instead of one net with a split head.
  bool separate_nets = true;
  /// One stretch per output variable (shared Pre-Net across variables).
  bool per_variable_stretch = false;
  NetSpec net{{16, 16}};

  friend bool operator==(const PreNetSpec&, const PreNetSpec&) = default;
};

/// Frame applied to the trunk input of one variable: y' = scale * R(angle) * y + shift.
struct Frame {
  double scale = 1.0;
  double angle = 0.0;  ///< ignored unless the coordinates are planar
  Eigen::VectorXd shift;
};

/// Planar rotation for y_dim == 2, identity for y_dim == 1.
Eigen::MatrixXd rotation_matrix(double angle, Eigen::Index y_dim);

/// y' = scale * R(angle) * y + shift. A frame with an empty shift means no shift.
Eigen::VectorXd prenet_transform(const Frame& frame, const Eigen::VectorXd& y);

/// Slots of the raw Pre-Net output vector: [log-stretch..., angle?, shift...].
struct PreNetLayout {
  Eigen::Index stretches = 0;
  Eigen::Index angles = 0;
  Eigen::Index shifts = 0;

  Eigen::Index size() const { return stretches + angles + shifts; }
  Eigen::Index angle_offset() const { return stretches; }
  Eigen::Index shift_offset() const { return stretches + angles; }

  friend bool operator==(const PreNetLayout&, const PreNetLayout&) = default;
};

/// Maps (scaled) u to the raw frame parameters. The stretch head is
/// exponentiated so the scale stays positive. Fresh Pre-Nets start at the
/// identity frame (zero last layer).
class PreNet {
 public:
  PreNet() = default;
  PreNet(PreNetLayout layout, std::vector<DenseNet> nets);

  static PreNet init(const PreNetSpec& spec, Eigen::Index u_dim, Eigen::Index y_dim, std::size_t n_variables,
                     Rng& rng);

  /// Raw outputs, layout.size() x N.
  Eigen::MatrixXd raw(const Eigen::MatrixXd& u) const;
  Frame frame(const Eigen::VectorXd& raw_column, std::size_t variable, Eigen::Index y_dim) const;

  const PreNetLayout& layout() const { return layout_; }
  const std::vector<DenseNet>& nets() const { return nets_; }
  std::vector<DenseNet>& nets() { return nets_; }
  /// Row range of each net in the raw output.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> net_rows() const;
  std::size_t param_count() const;

 private:
  PreNetLayout layout_;
  std::vector<DenseNet> nets_;
};

struct FlexSpec {
  int p = 1;
  NetSpec branch{{32, 32}};
  NetSpec trunk{{32, 32}};
  PreNetSpec prenet;
  /// Train on targets min-max scaled to [-1, 1]; predictions are mapped back.
  bool scale_targets = true;

  friend bool operator==(const FlexSpec&, const FlexSpec&) = default;
};

/// Per-variable branch (p + 1 outputs; the last one is the centering c) and trunk.
struct FlexHead {
  DenseNet branch;
  DenseNet trunk;
};

class FlexDeepONet {
 public:
  FlexDeepONet() = default;
  FlexDeepONet(std::vector<std::string> variables, InputScaling scaling, PreNet prenet, std::vector<FlexHead> heads,
               std::vector<MinMaxScaler> target_scaling);

  static FlexDeepONet init(std::vector<std::string> variables, Eigen::Index u_dim, Eigen::Index y_dim,
                           const FlexSpec& spec, InputScaling scaling, std::vector<MinMaxScaler> target_scaling,
                           std::uint64_t seed);

  Eigen::VectorXd forward(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const;
  /// Pointwise batch; returns n_variables x N.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const;

  /// Frame seen by `variable` for each u column, in scaled coordinates.
  std::vector<Frame> frames(const Eigen::MatrixXd& u, std::size_t variable) const;

  int p() const;
  std::size_t param_count() const;
  const std::vector<std::string>& variables() const { return variables_; }
  const InputScaling& scaling() const { return scaling_; }
  const PreNet& prenet() const { return prenet_; }
  PreNet& prenet() { return prenet_; }
  const std::vector<FlexHead>& heads() const { return heads_; }
  FlexHead& head(std::size_t i) { return heads_.at(i); }
  const std::vector<MinMaxScaler>& target_scaling() const { return target_scaling_; }

  /// Flat trainable parameters: Pre-Net nets, then branch and trunk per variable.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta);

  /// Mean squared error over (variables x batch) in the training (scaled
  /// target) space, with its gradient accumulated into `grad`. Inputs are
  /// already input-scaled; `targets` already target-scaled.
  double loss_and_grad(const Eigen::MatrixXd& us, const Eigen::MatrixXd& ys, const Eigen::MatrixXd& targets,
                       Eigen::VectorXd* grad) const;

 private:
  void check_dims(Eigen::Index u_rows, Eigen::Index y_rows) const;
  /// Predictions in training space for already scaled inputs.
  Eigen::MatrixXd predict_scaled(const Eigen::MatrixXd& us, const Eigen::MatrixXd& ys) const;

  std::vector<std::string> variables_;
  InputScaling scaling_;
  PreNet prenet_;
  std::vector<FlexHead> heads_;
  std::vector<MinMaxScaler> target_scaling_;
};

/// Joint Adam training of Pre-Net, branches and trunks on pointwise samples.
Fitted<FlexDeepONet> flex_fit(const PointData& data, const FlexSpec& spec, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

/// Learned frame per scenario.
struct AlignmentRow {
  Eigen::VectorXd u;
  Frame frame;
  double centering = 0.0;  ///< c(u), in physical units
  double amplitude = 1.0;  ///< b_1(u) when p == 1
};

struct AlignmentReport {
  std::vector<AlignmentRow> rows;
  /// Per scenario, transformed trunk coordinates of every grid point (y_dim x T).
  std::vector<Eigen::MatrixXd> transformed;
};

AlignmentReport alignment_diagnostics(const FlexDeepONet& model, const Eigen::MatrixXd& u, const Eigen::MatrixXd& y,
                                      std::size_t variable = 0);

/// Spread of one-dimensional curves (coords_j, values_j), one column per
/// scenario: the across-scenario standard deviation averaged over `samples`
/// points of the common coordinate range, after linear interpolation.
double curve_spread(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values, int samples = 200);

}  // namespace opnet
