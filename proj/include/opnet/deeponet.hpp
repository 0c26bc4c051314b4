#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opnet/nn.hpp"
#include "opnet/operator_data.hpp"
#include "opnet/svd.hpp"
#include "opnet/train.hpp"

namespace opnet {

/// Architecture of an unstacked DeepONet: p latent outputs from each of the
/// branch (input u) and trunk (input y) nets.
struct VanillaSpec {
  int p = 2;
  NetSpec branch{{32, 32, 32}};
  NetSpec trunk{{32, 32, 32}};

  friend bool operator==(const VanillaSpec&, const VanillaSpec&) = default;
};

/// Branch/trunk pair plus scalar bias for one output variable.
struct OperatorHead {
  DenseNet branch;
  DenseNet trunk;
  double bias = 0.0;
};

/// G(u)(y) = sum_i b_i(u) psi_i(y) + b0, one head per output variable.
class VanillaDeepONet {
 public:
  VanillaDeepONet() = default;
  VanillaDeepONet(std::vector<std::string> variables, InputScaling scaling, std::vector<OperatorHead> heads);

  static VanillaDeepONet init(std::vector<std::string> variables, Eigen::Index u_dim, Eigen::Index y_dim,
                              const VanillaSpec& spec, InputScaling scaling, std::uint64_t seed);

  /// One prediction per variable.
  Eigen::VectorXd forward(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const;
  /// Pointwise batch; returns n_variables x N.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const;
  /// Product grid for one variable; returns T x S.
  Eigen::MatrixXd predict_grid(std::size_t variable, const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const;

  int p() const;
  std::size_t param_count() const;
  const std::vector<std::string>& variables() const { return variables_; }
  const InputScaling& scaling() const { return scaling_; }
  const std::vector<OperatorHead>& heads() const { return heads_; }
  OperatorHead& head(std::size_t i) { return heads_.at(i); }

 private:
  void check_dims(Eigen::Index u_rows, Eigen::Index y_rows) const;

  std::vector<std::string> variables_;
  InputScaling scaling_;
  std::vector<OperatorHead> heads_;
};

template <class Model>
struct Fitted {
  Model model;
  std::vector<TrainResult> runs;  ///< one per independently trained block
};

/// End-to-end training of branch, trunk and bias. Variables are trained
/// independently. On grid data a mini-batch is a set of scenarios evaluated
/// at every grid point.
Fitted<VanillaDeepONet> vanilla_fit(const GridData& data, const VanillaSpec& spec, const TrainConfig& cfg);
Fitted<VanillaDeepONet> vanilla_fit(const PointData& data, const VanillaSpec& spec, const TrainConfig& cfg);

/// Trains only the branches and biases of `model`, keeping trunks frozen.
std::vector<TrainResult> fit_branches(VanillaDeepONet& model, const GridData& data, const TrainConfig& cfg);

struct PodSpec {
  int r = 2;
  NetSpec trunk{{32, 32, 32}};
  NetSpec branch{{32, 32, 32}};

  friend bool operator==(const PodSpec&, const PodSpec&) = default;
};

/// POD-DeepONet steps 1-2: SVD of each variable's raw snapshot matrix and a
/// trunk fit to the leading r left singular vectors (scaled by sqrt(T)).
/// Branches are freshly initialized.
Fitted<VanillaDeepONet> pod_fit_trunks(const GridData& data, const PodSpec& spec, const TrainConfig& trunk_cfg);

/// Full four-step paradigm: trunk fit, freeze, end-to-end branch training.
Fitted<VanillaDeepONet> pod_deeponet_fit(const GridData& data, const PodSpec& spec, const TrainConfig& trunk_cfg,
                                         const TrainConfig& branch_cfg);
Fitted<VanillaDeepONet> pod_deeponet_fit(const SnapshotMatrix& snapshots, int r, const PodSpec& spec,
                                         const TrainConfig& trunk_cfg, const TrainConfig& branch_cfg);

}  // namespace opnet
