#pragma once

#include <cstddef>
#include <utility>

#include <Eigen/Dense>

namespace opnet {

/// How the columns of a snapshot matrix were gathered.
///  - ScenarioAggregated: one column per scenario, holding its full trajectory.
///  - TimeAggregated: one column per time instant, holding a spatial field (POD layout).
enum class Aggregation { ScenarioAggregated, TimeAggregated };

/// n x m data matrix with its coordinates.
///
/// `row_coords` is n x dim_y (dim_y = 1 for time-series rows, 2 for flattened
/// planar grids). `col_meta` is m x dim_u and holds the scenario inputs or,
/// for time-aggregated data, the time stamp of each column.
class SnapshotMatrix {
 public:
  SnapshotMatrix() = default;
  SnapshotMatrix(Eigen::MatrixXd values, Aggregation kind, Eigen::MatrixXd row_coords,
                 Eigen::MatrixXd col_meta);

  const Eigen::MatrixXd& values() const { return values_; }
  Aggregation kind() const { return kind_; }
  const Eigen::MatrixXd& row_coords() const { return row_coords_; }
  const Eigen::MatrixXd& col_meta() const { return col_meta_; }

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }

  SnapshotMatrix with_values(Eigen::MatrixXd values) const;

 private:
  Eigen::MatrixXd values_;
  Aggregation kind_ = Aggregation::ScenarioAggregated;
  Eigen::MatrixXd row_coords_;
  Eigen::MatrixXd col_meta_;
};

enum class CenterMethod { None, Mean };
enum class ScaleMethod { None, Auto };

/// Per-column affine preprocessing x_j -> (x_j - center_j) / scale_j.
struct Preprocessing {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  CenterMethod center_method = CenterMethod::None;
  ScaleMethod scale_method = ScaleMethod::None;

  static Preprocessing identity(Eigen::Index columns);
};

/// Thin SVD X = U diag(sigma) V^T, possibly truncated.
///
/// `total_energy` (sum of sigma_i^2) and `total_amplitude` (sum of sigma_i)
/// always refer to the untruncated decomposition, so energy shares stay
/// meaningful after truncation.
struct Decomposition {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;
  double total_energy = 0.0;
  double total_amplitude = 0.0;

  Eigen::Index rank() const { return sigma.size(); }
};

/// Which singular-value power the energy share is computed with.
enum class EnergyConvention {
  Squared,  ///< sigma_i^2 shares (variance convention)
  Linear,   ///< sigma_i shares
};

struct EnergyRank {
  Eigen::Index rank = 0;
  bool reached = true;
};

struct SvdOptions {
  int max_sweeps = 80;
};

std::pair<SnapshotMatrix, Preprocessing> center_scale(const SnapshotMatrix& x, CenterMethod center,
                                                      ScaleMethod scale);
std::pair<Eigen::MatrixXd, Preprocessing> center_scale(const Eigen::MatrixXd& x, CenterMethod center,
                                                       ScaleMethod scale);

/// Applies a fitted preprocessing to a conformable matrix.
Eigen::MatrixXd apply_preprocessing(const Eigen::MatrixXd& x, const Preprocessing& prep);

/// One-sided Jacobi SVD. Singular pairs are sorted by descending sigma and
/// signed so that the largest-magnitude entry of each U column is positive.
Decomposition svd(const Eigen::MatrixXd& x, const SvdOptions& options = {});

Decomposition truncate(const Decomposition& dec, Eigen::Index r);

/// Scores Phi = U diag(sigma).
Eigen::MatrixXd principal_components(const Decomposition& dec);

/// Directions A = V.
Eigen::MatrixXd principal_directions(const Decomposition& dec);

double cumulative_energy(const Decomposition& dec, Eigen::Index k,
                         EnergyConvention convention = EnergyConvention::Squared);

/// Smallest k whose cumulative energy reaches `threshold`. When the stored
/// rank is insufficient, returns the stored rank with `reached == false`.
EnergyRank rank_for_energy(const Decomposition& dec, double threshold,
                           EnergyConvention convention = EnergyConvention::Squared);

/// Column j of the result is (Phi A^T)_j * scale_j + center_j.
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& a, const Preprocessing& prep);

/// Relative Frobenius norm ||a - b|| / ||a||.
double relative_error(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& approx);

}  // namespace opnet
