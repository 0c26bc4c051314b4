#include "opnet/operator_data.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "opnet/errors.hpp"

namespace opnet {

namespace {

void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

std::vector<double> column_key(const Eigen::MatrixXd& m, Eigen::Index j) {
  std::vector<double> key(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) key[static_cast<std::size_t>(i)] = m(i, j);
  return key;
}

}  // namespace

void PointData::validate() const {
  require(u.rows() > 0 && y.rows() > 0, ErrorKind::InvalidShape, "u and y need at least one feature");
  require(u.cols() == y.cols() && u.cols() == values.cols(), ErrorKind::InvalidShape,
          "u, y and values must have the same sample count");
  require(values.rows() == static_cast<Eigen::Index>(variables.size()), ErrorKind::InvalidShape,
          "values rows must match the variable list");
  require(u.allFinite() && y.allFinite() && values.allFinite(), ErrorKind::InvalidData, "non-finite sample");
}

PointData PointData::subset(const std::vector<std::size_t>& idx) const {
  PointData out;
  out.variables = variables;
  out.u.resize(u.rows(), static_cast<Eigen::Index>(idx.size()));
  out.y.resize(y.rows(), out.u.cols());
  out.values.resize(values.rows(), out.u.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(idx[k]);
    require(j < u.cols(), ErrorKind::InvalidShape, "subset index out of range");
    const auto c = static_cast<Eigen::Index>(k);
    out.u.col(c) = u.col(j);
    out.y.col(c) = y.col(j);
    out.values.col(c) = values.col(j);
  }
  return out;
}

void GridData::validate() const {
  require(u.rows() > 0 && y.rows() > 0, ErrorKind::InvalidShape, "u and y need at least one feature");
  require(!variables.empty() && values.size() == variables.size(), ErrorKind::InvalidShape,
          "one value matrix per variable is required");
  for (const auto& v : values) {
    require(v.rows() == y.cols() && v.cols() == u.cols(), ErrorKind::InvalidShape, "value matrix must be T x S");
    require(v.allFinite(), ErrorKind::InvalidData, "non-finite value");
  }
  require(u.allFinite() && y.allFinite(), ErrorKind::InvalidData, "non-finite coordinate");
}

PointData GridData::flatten() const {
  const Eigen::Index t = points();
  const Eigen::Index s = scenarios();
  PointData out;
  out.variables = variables;
  out.u.resize(u.rows(), t * s);
  out.y.resize(y.rows(), t * s);
  out.values.resize(static_cast<Eigen::Index>(values.size()), t * s);
  for (Eigen::Index j = 0; j < s; ++j) {
    for (Eigen::Index i = 0; i < t; ++i) {
      const Eigen::Index c = j * t + i;
      out.u.col(c) = u.col(j);
      out.y.col(c) = y.col(i);
      for (std::size_t v = 0; v < values.size(); ++v) out.values(static_cast<Eigen::Index>(v), c) = values[v](i, j);
    }
  }
  return out;
}

GridData GridData::select_scenarios(const std::vector<std::size_t>& idx) const {
  GridData out;
  out.variables = variables;
  out.y = y;
  out.u.resize(u.rows(), static_cast<Eigen::Index>(idx.size()));
  out.values.assign(values.size(), Eigen::MatrixXd(y.cols(), out.u.cols()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(idx[k]);
    require(j < u.cols(), ErrorKind::InvalidShape, "scenario index out of range");
    out.u.col(static_cast<Eigen::Index>(k)) = u.col(j);
    for (std::size_t v = 0; v < values.size(); ++v) out.values[v].col(static_cast<Eigen::Index>(k)) = values[v].col(j);
  }
  return out;
}

GridData to_grid(const PointData& data) {
  data.validate();
  std::map<std::vector<double>, Eigen::Index> u_index;
  std::map<std::vector<double>, Eigen::Index> y_index;
  std::vector<Eigen::Index> u_first;
  std::vector<Eigen::Index> y_first;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cell(static_cast<std::size_t>(data.size()));
  for (Eigen::Index k = 0; k < data.size(); ++k) {
    auto [uit, u_new] = u_index.try_emplace(column_key(data.u, k), static_cast<Eigen::Index>(u_first.size()));
    if (u_new) u_first.push_back(k);
    auto [yit, y_new] = y_index.try_emplace(column_key(data.y, k), static_cast<Eigen::Index>(y_first.size()));
    if (y_new) y_first.push_back(k);
    cell[static_cast<std::size_t>(k)] = {yit->second, uit->second};
  }
  const auto t = static_cast<Eigen::Index>(y_first.size());
  const auto s = static_cast<Eigen::Index>(u_first.size());
  if (t * s != data.size()) {
    throw Error(ErrorKind::GridRequired, "samples do not form a full (y, u) product grid: " + std::to_string(t) +
                                             " y values x " + std::to_string(s) + " scenarios != " +
                                             std::to_string(data.size()) + " samples");
  }
  GridData out;
  out.variables = data.variables;
  out.u.resize(data.u.rows(), s);
  out.y.resize(data.y.rows(), t);
  for (Eigen::Index j = 0; j < s; ++j) out.u.col(j) = data.u.col(u_first[static_cast<std::size_t>(j)]);
  for (Eigen::Index i = 0; i < t; ++i) out.y.col(i) = data.y.col(y_first[static_cast<std::size_t>(i)]);
  const auto nvar = static_cast<std::size_t>(data.values.rows());
  out.values.assign(nvar, Eigen::MatrixXd::Constant(t, s, std::numeric_limits<double>::quiet_NaN()));
  Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(t, s);
  for (Eigen::Index k = 0; k < data.size(); ++k) {
    const auto [i, j] = cell[static_cast<std::size_t>(k)];
    if (seen(i, j)++) throw Error(ErrorKind::GridRequired, "duplicate (y, u) sample");
    for (std::size_t v = 0; v < nvar; ++v) out.values[v](i, j) = data.values(static_cast<Eigen::Index>(v), k);
  }
  return out;
}

GridData grid_from_snapshots(const std::vector<SnapshotMatrix>& snapshots, std::vector<std::string> variables) {
  require(!snapshots.empty(), ErrorKind::InvalidShape, "no snapshot matrices");
  require(snapshots.size() == variables.size(), ErrorKind::InvalidShape, "one variable name per snapshot matrix");
  const auto& first = snapshots.front();
  GridData out;
  out.variables = std::move(variables);
  out.y = first.row_coords().transpose();
  out.u = first.col_meta().transpose();
  for (const auto& s : snapshots) {
    if (s.kind() != Aggregation::ScenarioAggregated) {
      throw Error(ErrorKind::GridRequired, "operator training needs scenario-aggregated snapshots");
    }
    if (s.rows() != first.rows() || s.cols() != first.cols() || s.row_coords() != first.row_coords() ||
        s.col_meta() != first.col_meta()) {
      throw Error(ErrorKind::GridRequired, "snapshot matrices are not aligned on one (y, scenario) grid");
    }
    out.values.push_back(s.values());
  }
  out.validate();
  return out;
}

InputScaling InputScaling::fit(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) {
  return {MinMaxScaler::fit(u, -1.0, 1.0, false), MinMaxScaler::fit(y, -1.0, 1.0, true)};
}

InputScaling InputScaling::identity(Eigen::Index u_dim, Eigen::Index y_dim) {
  return {MinMaxScaler::identity(u_dim), MinMaxScaler::identity(y_dim)};
}

}  // namespace opnet
