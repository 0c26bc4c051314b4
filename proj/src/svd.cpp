#include "opnet/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "opnet/errors.hpp"

namespace opnet {

namespace {

void require_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) throw Error(ErrorKind::InvalidData, std::string(what) + " contains non-finite entries");
}

// Completes the columns of `u` flagged in `missing` to an orthonormal set,
// using canonical basis vectors and two rounds of Gram-Schmidt.
void complete_orthonormal(Eigen::MatrixXd& u, const std::vector<bool>& missing) {
  const Eigen::Index n = u.rows();
  Eigen::Index candidate = 0;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (!missing[static_cast<std::size_t>(j)]) continue;
    for (; candidate < n; ++candidate) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(n, candidate);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < u.cols(); ++k) {
          if (k == j || (missing[static_cast<std::size_t>(k)] && k > j)) continue;
          v -= u.col(k).dot(v) * u.col(k);
        }
      }
      const double norm = v.norm();
      if (norm > 1e-8) {
        u.col(j) = v / norm;
        ++candidate;
        break;
      }
    }
  }
}

// Hestenes one-sided Jacobi on a tall matrix (rows >= cols).
Decomposition jacobi_tall(const Eigen::MatrixXd& x, const SvdOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  Eigen::MatrixXd a = x;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(m, m);
  const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(n);

  int sweep = 0;
  bool converged = (m < 2);
  while (!converged) {
    if (sweep >= options.max_sweeps) {
      throw NumericalFailure("one-sided Jacobi SVD did not converge after " + std::to_string(sweep) + " sweeps",
                             static_cast<std::size_t>(sweep));
    }
    ++sweep;
    converged = true;
    for (Eigen::Index i = 0; i < m - 1; ++i) {
      for (Eigen::Index j = i + 1; j < m; ++j) {
        const double alpha = a.col(i).squaredNorm();
        const double beta = a.col(j).squaredNorm();
        const double gamma = a.col(i).dot(a.col(j));
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double ai = a(r, i);
          const double aj = a(r, j);
          a(r, i) = c * ai - s * aj;
          a(r, j) = s * ai + c * aj;
        }
        for (Eigen::Index r = 0; r < m; ++r) {
          const double vi = v(r, i);
          const double vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
  }

  Eigen::VectorXd sigma(m);
  for (Eigen::Index j = 0; j < m; ++j) sigma(j) = a.col(j).norm();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) { return sigma(l) > sigma(r); });

  Decomposition dec;
  dec.U.resize(n, m);
  dec.V.resize(m, m);
  dec.sigma.resize(m);
  const double sigma_floor = sigma.size() ? sigma.maxCoeff() * tol : 0.0;
  std::vector<bool> missing(static_cast<std::size_t>(m), false);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index j = order[static_cast<std::size_t>(k)];
    dec.sigma(k) = sigma(j);
    dec.V.col(k) = v.col(j);
    if (sigma(j) > sigma_floor && sigma(j) > 0.0) {
      dec.U.col(k) = a.col(j) / sigma(j);
    } else {
      dec.U.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  if (std::any_of(missing.begin(), missing.end(), [](bool b) { return b; })) {
    complete_orthonormal(dec.U, missing);
  }
  return dec;
}

void apply_sign_convention(Decomposition& dec) {
  for (Eigen::Index k = 0; k < dec.U.cols(); ++k) {
    Eigen::Index idx = 0;
    dec.U.col(k).cwiseAbs().maxCoeff(&idx);
    if (dec.U(idx, k) < 0.0) {
      dec.U.col(k) *= -1.0;
      dec.V.col(k) *= -1.0;
    }
  }
}

}  // namespace

SnapshotMatrix::SnapshotMatrix(Eigen::MatrixXd values, Aggregation kind, Eigen::MatrixXd row_coords,
                               Eigen::MatrixXd col_meta)
    : values_(std::move(values)), kind_(kind), row_coords_(std::move(row_coords)), col_meta_(std::move(col_meta)) {
  require_finite(values_, "snapshot values");
  if (row_coords_.rows() != values_.rows()) {
    throw Error(ErrorKind::InvalidShape, "row_coords has " + std::to_string(row_coords_.rows()) + " rows, expected " +
                                             std::to_string(values_.rows()));
  }
  if (col_meta_.rows() != values_.cols()) {
    throw Error(ErrorKind::InvalidShape, "col_meta has " + std::to_string(col_meta_.rows()) + " entries, expected " +
                                             std::to_string(values_.cols()));
  }
}

SnapshotMatrix SnapshotMatrix::with_values(Eigen::MatrixXd values) const {
  return SnapshotMatrix(std::move(values), kind_, row_coords_, col_meta_);
}

Preprocessing Preprocessing::identity(Eigen::Index columns) {
  return {Eigen::VectorXd::Zero(columns), Eigen::VectorXd::Ones(columns), CenterMethod::None, ScaleMethod::None};
}

std::pair<Eigen::MatrixXd, Preprocessing> center_scale(const Eigen::MatrixXd& x, CenterMethod center,
                                                       ScaleMethod scale) {
  if (x.size() == 0) throw Error(ErrorKind::InvalidData, "cannot preprocess an empty matrix");
  require_finite(x, "snapshot matrix");

  Preprocessing prep = Preprocessing::identity(x.cols());
  prep.center_method = center;
  prep.scale_method = scale;
  const auto n = static_cast<double>(x.rows());

  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    if (center == CenterMethod::Mean) prep.center(j) = mean;
    if (scale == ScaleMethod::Auto && x.rows() > 1) {
      const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / (n - 1.0));
      const double floor = 1e-12 * (x.col(j).cwiseAbs().maxCoeff() + 1.0);
      prep.scale(j) = sd < floor ? 1.0 : sd;
    }
  }
  return {apply_preprocessing(x, prep), std::move(prep)};
}

std::pair<SnapshotMatrix, Preprocessing> center_scale(const SnapshotMatrix& x, CenterMethod center,
                                                      ScaleMethod scale) {
  auto [values, prep] = center_scale(x.values(), center, scale);
  return {x.with_values(std::move(values)), std::move(prep)};
}

Eigen::MatrixXd apply_preprocessing(const Eigen::MatrixXd& x, const Preprocessing& prep) {
  if (prep.center.size() != x.cols() || prep.scale.size() != x.cols()) {
    throw Error(ErrorKind::InvalidShape, "preprocessing vectors do not match the column count");
  }
  Eigen::MatrixXd out = x.rowwise() - prep.center.transpose();
  out.array().rowwise() /= prep.scale.transpose().array();
  return out;
}

Decomposition svd(const Eigen::MatrixXd& x, const SvdOptions& options) {
  if (x.rows() < 1 || x.cols() < 1) throw Error(ErrorKind::InvalidShape, "svd needs a non-empty matrix");
  require_finite(x, "svd input");

  Decomposition dec;
  if (x.rows() >= x.cols()) {
    dec = jacobi_tall(x, options);
  } else {
    Decomposition t = jacobi_tall(x.transpose(), options);
    dec.U = std::move(t.V);
    dec.V = std::move(t.U);
    dec.sigma = std::move(t.sigma);
  }
  apply_sign_convention(dec);
  dec.total_energy = dec.sigma.squaredNorm();
  dec.total_amplitude = dec.sigma.sum();
  return dec;
}

Decomposition truncate(const Decomposition& dec, Eigen::Index r) {
  if (r < 1 || r > dec.rank()) {
    throw Error(ErrorKind::InvalidRank,
                "cannot truncate rank " + std::to_string(dec.rank()) + " decomposition to " + std::to_string(r));
  }
  Decomposition out;
  out.U = dec.U.leftCols(r);
  out.sigma = dec.sigma.head(r);
  out.V = dec.V.leftCols(r);
  out.total_energy = dec.total_energy;
  out.total_amplitude = dec.total_amplitude;
  return out;
}

Eigen::MatrixXd principal_components(const Decomposition& dec) { return dec.U * dec.sigma.asDiagonal(); }

Eigen::MatrixXd principal_directions(const Decomposition& dec) { return dec.V; }

double cumulative_energy(const Decomposition& dec, Eigen::Index k, EnergyConvention convention) {
  if (k < 1 || k > dec.rank()) {
    throw Error(ErrorKind::InvalidRank, "energy index " + std::to_string(k) + " outside [1, " +
                                            std::to_string(dec.rank()) + "]");
  }
  if (convention == EnergyConvention::Squared) {
    if (dec.total_energy <= 0.0) return 1.0;
    return std::min(1.0, dec.sigma.head(k).squaredNorm() / dec.total_energy);
  }
  if (dec.total_amplitude <= 0.0) return 1.0;
  return std::min(1.0, dec.sigma.head(k).sum() / dec.total_amplitude);
}

EnergyRank rank_for_energy(const Decomposition& dec, double threshold, EnergyConvention convention) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidData, "energy threshold must lie in (0, 1]");
  }
  for (Eigen::Index k = 1; k <= dec.rank(); ++k) {
    if (cumulative_energy(dec, k, convention) >= threshold) return {k, true};
  }
  return {dec.rank(), false};
}

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& a, const Preprocessing& prep) {
  if (phi.cols() != a.cols()) {
    throw Error(ErrorKind::InvalidShape, "Phi and A disagree on the rank: " + std::to_string(phi.cols()) + " vs " +
                                             std::to_string(a.cols()));
  }
  if (prep.center.size() != a.rows() || prep.scale.size() != a.rows()) {
    throw Error(ErrorKind::InvalidShape, "preprocessing does not match the number of columns");
  }
  Eigen::MatrixXd out = phi * a.transpose();
  out.array().rowwise() *= prep.scale.transpose().array();
  out.rowwise() += prep.center.transpose();
  return out;
}

double relative_error(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& approx) {
  if (reference.rows() != approx.rows() || reference.cols() != approx.cols()) {
    throw Error(ErrorKind::InvalidShape, "relative_error on mismatched shapes");
  }
  const double denom = reference.norm();
  const double num = (reference - approx).norm();
  return denom > 0.0 ? num / denom : num;
}

}  // namespace opnet
