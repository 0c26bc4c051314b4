#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opnet/adam.hpp"
#include "opnet/errors.hpp"
#include "opnet/nn.hpp"
#include "opnet/rng.hpp"

namespace opnet {

/// Piecewise-constant learning rate: entry (e, lr) applies from epoch e on.
struct LrStep {
  std::size_t epoch = 0;
  double lr = 1e-3;
  friend bool operator==(const LrStep&, const LrStep&) = default;
};

struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch_size = 256;
  std::vector<LrStep> lr_schedule{{0, 1e-3}};
  std::uint64_t seed = 0;
  double validation_fraction = 0.0;
  std::optional<std::size_t> early_stop_patience;
  AdamConfig adam;

  double lr_at(std::size_t epoch) const;
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossHistory {
  std::vector<double> train;
  std::vector<double> validation;  ///< empty unless validation is enabled
};

struct TrainResult {
  LossHistory history;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
};

/// A model plus data seen through a flat trainable parameter vector. Samples
/// are opaque indices; what a sample is (a point, a scenario) is up to the
/// problem.
template <class P>
concept TrainingProblem = requires(P& p, const P& cp, const Eigen::VectorXd& theta,
                                   std::span<const std::size_t> batch, Eigen::VectorXd& grad) {
  { cp.sample_count() } -> std::convertible_to<std::size_t>;
  { cp.parameters() } -> std::convertible_to<Eigen::VectorXd>;
  p.set_parameters(theta);
  { cp.loss_and_grad(batch, grad) } -> std::convertible_to<double>;
  { cp.loss(batch) } -> std::convertible_to<double>;
};

/// Splits sample indices into (train, validation) with the "split" stream.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double fraction,
                                                                            std::uint64_t seed);

/// Optional per-epoch hook; return false to stop early.
using EpochCallback = std::function<bool(std::size_t epoch, double train_loss, double validation_loss)>;

/// Shuffled mini-batch Adam loop. When validation is enabled the parameters
/// of the best validation epoch are restored at the end.
template <TrainingProblem P>
TrainResult train_problem(P& problem, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  TrainResult result;
  if (cfg.epochs == 0) return result;
  if (problem.sample_count() == 0) throw Error(ErrorKind::InvalidData, "training set is empty");

  auto [train_idx, val_idx] = split_indices(problem.sample_count(), cfg.validation_fraction, cfg.seed);
  if (train_idx.empty()) throw Error(ErrorKind::InvalidData, "validation split leaves no training samples");
  const bool use_val = !val_idx.empty();

  Eigen::VectorXd theta = problem.parameters();
  AdamState adam = AdamState::fresh(theta.size(), cfg.adam);
  Eigen::VectorXd grad(theta.size());
  Rng shuffle = stream_rng(cfg.seed, "shuffle");

  Eigen::VectorXd best_theta = theta;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = cfg.lr_at(epoch);
    shuffle.shuffle(train_idx);
    double weighted = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, train_idx.size() - start);
      std::span<const std::size_t> batch(train_idx.data() + start, len);
      grad.setZero();
      double loss = 0.0;
      try {
        loss = problem.loss_and_grad(batch, grad);
      } catch (const NumericalFailure&) {
        throw DivergedAtEpoch(epoch);
      }
      if (!std::isfinite(loss) || !grad.allFinite()) throw DivergedAtEpoch(epoch);
      weighted += loss * static_cast<double>(len);
      adam_step(theta, grad, adam);
      problem.set_parameters(theta);
    }
    const double train_loss = weighted / static_cast<double>(train_idx.size());
    result.history.train.push_back(train_loss);
    result.epochs_run = epoch + 1;

    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (use_val) {
      val_loss = problem.loss(val_idx);
      if (!std::isfinite(val_loss)) throw DivergedAtEpoch(epoch);
      result.history.validation.push_back(val_loss);
      if (val_loss < best_val) {
        best_val = val_loss;
        best_theta = theta;
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
    }
    if (on_epoch && !on_epoch(epoch, train_loss, val_loss)) break;
    if (use_val && cfg.early_stop_patience && since_best >= *cfg.early_stop_patience) break;
  }
  if (use_val) problem.set_parameters(best_theta);
  return result;
}

/// Input/target columns for plain network regression.
struct RegressionData {
  Eigen::MatrixXd inputs;   // in x N
  Eigen::MatrixXd targets;  // out x N
};

/// Fits `net` in place by MSE.
TrainResult train(DenseNet& net, const RegressionData& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Gathers the listed columns.
Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> idx);

}  // namespace opnet
