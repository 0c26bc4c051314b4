#include "opnet/svd_deeponet.hpp"

#include <future>
#include <string>
#include <utility>

#include "opnet/errors.hpp"
#include "opnet/rng.hpp"

namespace opnet {

Fitted<ScaledNet> fit_scaled_net(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const NetSpec& spec,
                                 const TrainConfig& cfg) {
  if (inputs.cols() != targets.cols()) throw Error(ErrorKind::InvalidShape, "inputs and targets differ in count");
  ScaledNet s;
  s.in = MinMaxScaler::fit(inputs, -1.0, 1.0, inputs.rows() > 1);
  s.out = MinMaxScaler::fit(targets, -1.0, 1.0, false);
  Rng rng = stream_rng(cfg.seed, "init");
  s.net = DenseNet::glorot(static_cast<int>(inputs.rows()), static_cast<int>(targets.rows()), spec, rng);
  TrainResult run = train(s.net, {s.in.transform(inputs), s.out.transform(targets)}, cfg);
  return {std::move(s), {std::move(run)}};
}

namespace {

std::vector<std::vector<std::size_t>> resolve_groups(const SvdSpec& spec, std::size_t nvar) {
  if (spec.shared_groups.empty()) {
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t v = 0; v < nvar; ++v) groups.push_back({v});
    return groups;
  }
  std::vector<int> seen(nvar, 0);
  for (const auto& g : spec.shared_groups) {
    if (g.empty()) throw Error(ErrorKind::InvalidShape, "empty trunk-sharing group");
    for (auto v : g) {
      if (v >= nvar) throw Error(ErrorKind::InvalidShape, "group refers to unknown variable " + std::to_string(v));
      ++seen[v];
    }
  }
  for (std::size_t v = 0; v < nvar; ++v) {
    if (seen[v] != 1) throw Error(ErrorKind::InvalidShape, "shared groups must partition the variables");
  }
  return spec.shared_groups;
}

}  // namespace

std::vector<SvdGroupTargets> svd_targets(const GridData& data, const SvdSpec& spec) {
  data.validate();
  if (spec.r < 1) throw Error(ErrorKind::InvalidRank, "r must be positive");
  const Eigen::Index s = data.scenarios();
  std::vector<SvdGroupTargets> out;
  for (const auto& group : resolve_groups(spec, data.variables.size())) {
    Eigen::MatrixXd z(data.points(), s * static_cast<Eigen::Index>(group.size()));
    for (std::size_t k = 0; k < group.size(); ++k) z.middleCols(static_cast<Eigen::Index>(k) * s, s) = data.values[group[k]];
    SvdGroupTargets t;
    t.variables = group;
    auto [zs, prep] = center_scale(z, CenterMethod::Mean, ScaleMethod::Auto);
    t.preprocessing = std::move(prep);
    const Decomposition full = svd(zs);
    if (spec.r > full.rank()) {
      throw Error(ErrorKind::InvalidRank,
                  "r = " + std::to_string(spec.r) + " exceeds the snapshot rank " + std::to_string(full.rank()));
    }
    t.decomposition = truncate(full, spec.r);
    t.phi = principal_components(t.decomposition);
    const Eigen::MatrixXd a = principal_directions(t.decomposition);
    for (std::size_t k = 0; k < group.size(); ++k) {
      const Eigen::Index off = static_cast<Eigen::Index>(k) * s;
      Eigen::MatrixXd b(s, spec.r + 2);
      b.leftCols(spec.r) = a.middleRows(off, s);
      b.col(spec.r) = t.preprocessing.center.segment(off, s);
      b.col(spec.r + 1) = t.preprocessing.scale.segment(off, s);
      t.b.push_back(std::move(b));
    }
    out.push_back(std::move(t));
  }
  return out;
}

double svd_compose(const Eigen::VectorXd& phi, const Eigen::VectorXd& branch_out) {
  const Eigen::Index r = phi.size();
  if (branch_out.size() != r + 2) throw Error(ErrorKind::InvalidShape, "branch output must have r + 2 entries");
  return branch_out(r + 1) * phi.dot(branch_out.head(r)) + branch_out(r);
}

Eigen::MatrixXd svd_compose_grid(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& branch_rows) {
  const Eigen::Index r = phi.cols();
  if (branch_rows.cols() != r + 2) throw Error(ErrorKind::InvalidShape, "branch rows must have r + 2 columns");
  Eigen::MatrixXd out = phi * branch_rows.leftCols(r).transpose();
  out.array().rowwise() *= branch_rows.col(r + 1).transpose().array();
  out.array().rowwise() += branch_rows.col(r).transpose().array();
  return out;
}

SvdDeepONet::SvdDeepONet(std::vector<std::string> variables, int r, std::vector<SvdTrunkGroup> groups,
                         std::vector<ScaledNet> branches, std::vector<Preprocessing> training_preprocessing)
    : variables_(std::move(variables)),
      r_(r),
      groups_(std::move(groups)),
      branches_(std::move(branches)),
      preprocessing_(std::move(training_preprocessing)) {
  const std::size_t nvar = variables_.size();
  if (nvar == 0 || branches_.size() != nvar) throw Error(ErrorKind::InvalidShape, "one branch per variable");
  if (!preprocessing_.empty() && preprocessing_.size() != nvar) {
    throw Error(ErrorKind::InvalidShape, "one preprocessing record per variable");
  }
  group_of_.assign(nvar, groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].trunk.net.output_dim() != r_) throw Error(ErrorKind::InvalidShape, "trunk output must equal r");
    for (auto v : groups_[g].variables) {
      if (v >= nvar || group_of_[v] != groups_.size()) {
        throw Error(ErrorKind::InvalidShape, "trunk groups must partition the variables");
      }
      group_of_[v] = g;
    }
  }
  for (std::size_t v = 0; v < nvar; ++v) {
    if (group_of_[v] == groups_.size()) throw Error(ErrorKind::InvalidShape, "variable without a trunk group");
    if (branches_[v].net.output_dim() != r_ + 2) throw Error(ErrorKind::InvalidShape, "branch output must be r + 2");
    if (branches_[v].net.input_dim() != branches_.front().net.input_dim()) {
      throw Error(ErrorKind::InvalidShape, "branches disagree on the input dim");
    }
  }
}

Eigen::VectorXd SvdDeepONet::forward(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const {
  return predict(u, y).col(0);
}

Eigen::MatrixXd SvdDeepONet::predict(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) const {
  if (u.rows() != branches_.front().net.input_dim() || y.rows() != groups_.front().trunk.net.input_dim()) {
    throw Error(ErrorKind::InvalidShape, "input dims do not match the model");
  }
  if (u.cols() != y.cols()) throw Error(ErrorKind::InvalidShape, "u and y must have the same sample count");
  std::vector<Eigen::MatrixXd> phi;
  for (const auto& g : groups_) phi.push_back(g.trunk.predict(y));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(variables_.size()), u.cols());
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    const Eigen::MatrixXd b = branches_[v].predict(u);
    const Eigen::MatrixXd& f = phi[group_of_[v]];
    const auto rows = b.topRows(r_).array() * f.array();
    out.row(static_cast<Eigen::Index>(v)) =
        b.row(r_ + 1).array() * rows.colwise().sum() + b.row(r_).array();
  }
  return out;
}

Eigen::MatrixXd SvdDeepONet::predict_grid(std::size_t variable, const Eigen::MatrixXd& u,
                                          const Eigen::MatrixXd& y) const {
  if (variable >= variables_.size()) throw Error(ErrorKind::InvalidShape, "unknown variable index");
  if (u.rows() != branches_.front().net.input_dim() || y.rows() != groups_.front().trunk.net.input_dim()) {
    throw Error(ErrorKind::InvalidShape, "input dims do not match the model");
  }
  const Eigen::MatrixXd phi = groups_[group_of_[variable]].trunk.predict(y).transpose();
  const Eigen::MatrixXd rows = branches_[variable].predict(u).transpose();
  return svd_compose_grid(phi, rows);
}

std::size_t SvdDeepONet::param_count() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.trunk.param_count();
  for (const auto& b : branches_) n += b.param_count();
  return n;
}

Fitted<SvdDeepONet> svd_deeponet_fit(const GridData& data, const SvdSpec& spec, const TrainConfig& trunk_cfg,
                                     const TrainConfig& branch_cfg) {
  trunk_cfg.validate();
  branch_cfg.validate();
  const auto targets = svd_targets(data, spec);
  const std::size_t nvar = data.variables.size();

  auto fit_trunks = [&]() {
    std::vector<Fitted<ScaledNet>> fits;
    for (std::size_t g = 0; g < targets.size(); ++g) {
      TrainConfig cfg = trunk_cfg;
      cfg.seed = derive_seed(trunk_cfg.seed, "trunk/" + std::to_string(g));
      fits.push_back(fit_scaled_net(data.y, targets[g].phi.transpose(), spec.trunk, cfg));
    }
    return fits;
  };
  auto trunk_job = std::async(std::launch::async, fit_trunks);

  std::vector<ScaledNet> branches(nvar);
  std::vector<Preprocessing> preps(nvar);
  std::vector<TrainResult> branch_runs(nvar);
  for (const auto& t : targets) {
    const Eigen::Index s = data.scenarios();
    for (std::size_t k = 0; k < t.variables.size(); ++k) {
      const std::size_t v = t.variables[k];
      TrainConfig cfg = branch_cfg;
      cfg.seed = derive_seed(branch_cfg.seed, "branch/" + data.variables[v]);
      auto fit = fit_scaled_net(data.u, t.b[k].transpose(), spec.branch, cfg);
      branches[v] = std::move(fit.model);
      branch_runs[v] = std::move(fit.runs.front());
      const Eigen::Index off = static_cast<Eigen::Index>(k) * s;
      preps[v].center = t.preprocessing.center.segment(off, s);
      preps[v].scale = t.preprocessing.scale.segment(off, s);
      preps[v].center_method = t.preprocessing.center_method;
      preps[v].scale_method = t.preprocessing.scale_method;
    }
  }

  auto trunk_fits = trunk_job.get();
  std::vector<SvdTrunkGroup> groups;
  std::vector<TrainResult> runs;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    groups.push_back({targets[g].variables, std::move(trunk_fits[g].model)});
    runs.push_back(std::move(trunk_fits[g].runs.front()));
  }
  runs.insert(runs.end(), branch_runs.begin(), branch_runs.end());
  return {SvdDeepONet(data.variables, spec.r, std::move(groups), std::move(branches), std::move(preps)),
          std::move(runs)};
}

}  // namespace opnet
