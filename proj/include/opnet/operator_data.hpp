#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opnet/scaler.hpp"
#include "opnet/svd.hpp"

namespace opnet {

/// Pointwise operator samples (u_k, y_k, G(u_k)(y_k)); one column per sample.
struct PointData {
  Eigen::MatrixXd u;       ///< du x N
  Eigen::MatrixXd y;       ///< dy x N
  Eigen::MatrixXd values;  ///< n_variables x N
  std::vector<std::string> variables;

  Eigen::Index size() const { return u.cols(); }
  void validate() const;
  PointData subset(const std::vector<std::size_t>& idx) const;
};

/// Operator samples on a full (y, scenario) product grid.
struct GridData {
  Eigen::MatrixXd u;                    ///< du x S
  Eigen::MatrixXd y;                    ///< dy x T
  std::vector<Eigen::MatrixXd> values;  ///< per variable, T x S
  std::vector<std::string> variables;

  Eigen::Index scenarios() const { return u.cols(); }
  Eigen::Index points() const { return y.cols(); }
  void validate() const;
  PointData flatten() const;
  GridData select_scenarios(const std::vector<std::size_t>& idx) const;
};

/// Regroups pointwise samples on their (y, u) product; throws GridRequired
/// when some (y, u) pair is missing or duplicated.
GridData to_grid(const PointData& data);

/// Builds grid data from scenario-aggregated snapshot matrices (one per
/// variable) sharing row coordinates and scenario inputs.
GridData grid_from_snapshots(const std::vector<SnapshotMatrix>& snapshots, std::vector<std::string> variables);

/// Fixed input normalization applied ahead of the branch and trunk nets:
/// u per feature onto [-1, 1]; y isotropically onto [-1, 1].
struct InputScaling {
  MinMaxScaler u;
  MinMaxScaler y;

  static InputScaling fit(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y);
  static InputScaling identity(Eigen::Index u_dim, Eigen::Index y_dim);

  friend bool operator==(const InputScaling&, const InputScaling&) = default;
};

}  // namespace opnet
