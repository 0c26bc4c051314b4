#pragma once

#include <Eigen/Dense>

namespace opnet {

/// Per-feature affine map of [min, max] onto [lo, hi]; features are rows.
///
/// Features with max == min map to the middle of the target range. With
/// `isotropic`, all features share the widest range so that rotations in the
/// scaled space stay rigid.
class MinMaxScaler {
 public:
  MinMaxScaler() = default;

  static MinMaxScaler fit(const Eigen::MatrixXd& data, double lo = 0.0, double hi = 1.0, bool isotropic = false);
  static MinMaxScaler from_bounds(const Eigen::VectorXd& min, const Eigen::VectorXd& max, double lo = 0.0,
                                  double hi = 1.0, bool isotropic = false);
  static MinMaxScaler identity(Eigen::Index features);

  Eigen::MatrixXd transform(const Eigen::MatrixXd& data) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& data) const;

  Eigen::Index features() const { return min_.size(); }
  const Eigen::VectorXd& min() const { return min_; }
  const Eigen::VectorXd& max() const { return max_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool isotropic() const { return isotropic_; }

  /// transform(x) = gain .* x + offset
  const Eigen::VectorXd& gain() const { return gain_; }
  const Eigen::VectorXd& offset() const { return offset_; }

  friend bool operator==(const MinMaxScaler& a, const MinMaxScaler& b) {
    return a.min_ == b.min_ && a.max_ == b.max_ && a.lo_ == b.lo_ && a.hi_ == b.hi_ && a.isotropic_ == b.isotropic_;
  }

 private:
  void compute_affine();

  Eigen::VectorXd min_;
  Eigen::VectorXd max_;
  double lo_ = 0.0;
  double hi_ = 1.0;
  bool isotropic_ = false;
  Eigen::VectorXd gain_;
  Eigen::VectorXd offset_;
};

/// Fit-and-transform convenience; returns the scaled data.
Eigen::MatrixXd minmax_fit_transform(const Eigen::MatrixXd& data, MinMaxScaler& scaler);
Eigen::MatrixXd minmax_inverse(const Eigen::MatrixXd& data, const MinMaxScaler& scaler);

}  // namespace opnet
