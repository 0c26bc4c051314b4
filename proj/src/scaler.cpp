#include "opnet/scaler.hpp"

#include <string>

#include "opnet/errors.hpp"

namespace opnet {

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& data, double lo, double hi, bool isotropic) {
  if (data.cols() == 0) throw Error(ErrorKind::InvalidData, "cannot fit a scaler on zero samples");
  if (!data.allFinite()) throw Error(ErrorKind::InvalidData, "scaler input contains non-finite entries");
  return from_bounds(data.rowwise().minCoeff(), data.rowwise().maxCoeff(), lo, hi, isotropic);
}

MinMaxScaler MinMaxScaler::from_bounds(const Eigen::VectorXd& min, const Eigen::VectorXd& max, double lo, double hi,
                                       bool isotropic) {
  if (min.size() != max.size()) throw Error(ErrorKind::InvalidShape, "scaler bounds differ in length");
  if (!(hi > lo)) throw Error(ErrorKind::InvalidBounds, "scaler target range must satisfy lo < hi");
  if ((max.array() < min.array()).any()) throw Error(ErrorKind::InvalidBounds, "scaler max below min");
  MinMaxScaler s;
  s.min_ = min;
  s.max_ = max;
  s.lo_ = lo;
  s.hi_ = hi;
  s.isotropic_ = isotropic;
  s.compute_affine();
  return s;
}

MinMaxScaler MinMaxScaler::identity(Eigen::Index features) {
  return from_bounds(Eigen::VectorXd::Zero(features), Eigen::VectorXd::Ones(features), 0.0, 1.0, false);
}

void MinMaxScaler::compute_affine() {
  const Eigen::Index n = min_.size();
  gain_.resize(n);
  offset_.resize(n);
  const double mid_out = 0.5 * (lo_ + hi_);
  const double shared_range = n > 0 ? (max_ - min_).maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double range = isotropic_ ? shared_range : max_(i) - min_(i);
    if (!(range > 0.0)) {
      gain_(i) = 0.0;
      offset_(i) = mid_out;
    } else if (isotropic_) {
      gain_(i) = (hi_ - lo_) / range;
      offset_(i) = mid_out - 0.5 * (min_(i) + max_(i)) * gain_(i);
    } else {
      gain_(i) = (hi_ - lo_) / range;
      offset_(i) = lo_ - min_(i) * gain_(i);
    }
  }
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& data) const {
  if (data.rows() != features()) {
    throw Error(ErrorKind::InvalidShape, "scaler fitted on " + std::to_string(features()) + " features, got " +
                                             std::to_string(data.rows()));
  }
  Eigen::MatrixXd out = gain_.asDiagonal() * data;
  out.colwise() += offset_;
  return out;
}

Eigen::MatrixXd MinMaxScaler::inverse(const Eigen::MatrixXd& data) const {
  if (data.rows() != features()) {
    throw Error(ErrorKind::InvalidShape, "scaler fitted on " + std::to_string(features()) + " features, got " +
                                             std::to_string(data.rows()));
  }
  Eigen::MatrixXd out(data.rows(), data.cols());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (gain_(i) == 0.0) {
      out.row(i).setConstant(min_(i));
    } else {
      out.row(i) = (data.row(i).array() - offset_(i)) / gain_(i);
    }
  }
  return out;
}

Eigen::MatrixXd minmax_fit_transform(const Eigen::MatrixXd& data, MinMaxScaler& scaler) {
  scaler = MinMaxScaler::fit(data);
  return scaler.transform(data);
}

Eigen::MatrixXd minmax_inverse(const Eigen::MatrixXd& data, const MinMaxScaler& scaler) {
  return scaler.inverse(data);
}

}  // namespace opnet
