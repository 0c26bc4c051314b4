#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opnet/deeponet.hpp"
#include "opnet/nn.hpp"
#include "opnet/operator_data.hpp"
#include "opnet/scaler.hpp"
#include "opnet/svd.hpp"
#include "opnet/train.hpp"

namespace opnet {

/// Network wrapped in fixed input/output min-max maps onto [-1, 1].
struct ScaledNet {
  MinMaxScaler in;
  DenseNet net;
  MinMaxScaler out;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const { return out.inverse(net.forward_batch(in.transform(x))); }
  std::size_t param_count() const { return net.param_count(); }
};

/// Fits a ScaledNet on (inputs; targets) with nn-core training.
Fitted<ScaledNet> fit_scaled_net(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const NetSpec& spec,
                                 const TrainConfig& cfg);

struct SvdSpec {
  int r = 2;
  NetSpec trunk{{32, 32, 32}};
  NetSpec branch{{32, 32, 32}};
  /// Partition of the variables into trunk-sharing groups; empty means one
  /// group per variable.
  std::vector<std::vector<std::size_t>> shared_groups;

  friend bool operator==(const SvdSpec&, const SvdSpec&) = default;
};

/// Regression targets of one trunk-sharing group.
struct SvdGroupTargets {
  std::vector<std::size_t> variables;
  Preprocessing preprocessing;    ///< per column of the concatenated matrix
  Decomposition decomposition;    ///< truncated to r
  Eigen::MatrixXd phi;            ///< T x r principal components (trunk targets)
  std::vector<Eigen::MatrixXd> b; ///< per member variable: S x (r + 2) rows [alpha_1..alpha_r, c, d]
};

/// Center + auto-scale, SVD, truncation and coefficient matrices B for every
/// group.
std::vector<SvdGroupTargets> svd_targets(const GridData& data, const SvdSpec& spec);

/// d * (phi . alpha) + c for one (y, u) pair; `branch_out` = [alpha_1..alpha_r, c, d].
double svd_compose(const Eigen::VectorXd& phi, const Eigen::VectorXd& branch_out);
/// Same on a grid: phi rows T x r, branch rows S x (r + 2); returns T x S.
Eigen::MatrixXd svd_compose_grid(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& branch_rows);

struct SvdTrunkGroup {
  std::vector<std::size_t> variables;
  ScaledNet trunk;  ///< y -> Phi(y)
};

/// Assembled SVD-DeepONet: independently fitted trunks (per group) and
/// branches (per variable), composed at prediction time only.
class SvdDeepONet {
 public:
  SvdDeepONet() = default;
  SvdDeepONet(std::vector<std::string> variables, int r, std::vector<SvdTrunkGroup> groups,
              std::vector<ScaledNet> branches, std::vector<Preprocessing> training_preprocessing);

  Eigen::VectorXd forward(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd predict_grid(std::size_t variable, const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const;

  int r() const { return r_; }
  std::size_t param_count() const;
  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<SvdTrunkGroup>& groups() const { return groups_; }
  const std::vector<ScaledNet>& branches() const { return branches_; }
  const std::vector<Preprocessing>& training_preprocessing() const { return preprocessing_; }
  std::size_t group_of(std::size_t variable) const { return group_of_.at(variable); }

 private:
  std::vector<std::string> variables_;
  int r_ = 0;
  std::vector<SvdTrunkGroup> groups_;
  std::vector<ScaledNet> branches_;
  std::vector<Preprocessing> preprocessing_;  ///< per variable, the (c, d) seen in training
  std::vector<std::size_t> group_of_;
};

/// Five-step paradigm. Trunk and branch fits share no state and run on
/// separate threads; the assembly needs no further training.
Fitted<SvdDeepONet> svd_deeponet_fit(const GridData& data, const SvdSpec& spec, const TrainConfig& trunk_cfg,
                                     const TrainConfig& branch_cfg);

}  // namespace opnet
