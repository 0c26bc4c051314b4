#include "opnet/train.hpp"

#include <numeric>

namespace opnet {

double TrainConfig::lr_at(std::size_t epoch) const {
  double lr = adam.lr;
  for (const auto& step : lr_schedule) {
    if (step.epoch <= epoch) lr = step.lr;
  }
  return lr;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(ErrorKind::InvalidData, "batch_size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidData, "validation_fraction must lie in [0, 1)");
  }
  for (std::size_t i = 1; i < lr_schedule.size(); ++i) {
    if (lr_schedule[i].epoch <= lr_schedule[i - 1].epoch) {
      throw Error(ErrorKind::InvalidData, "lr_schedule epochs must be strictly increasing");
    }
  }
  if (early_stop_patience && *early_stop_patience == 0) {
    throw Error(ErrorKind::InvalidData, "early_stop_patience must be positive");
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> all(count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (fraction <= 0.0) return {all, {}};
  Rng rng = stream_rng(seed, "split");
  rng.shuffle(all);
  const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count)));
  std::vector<std::size_t> val(all.end() - static_cast<std::ptrdiff_t>(n_val), all.end());
  all.resize(count - n_val);
  std::sort(all.begin(), all.end());
  std::sort(val.begin(), val.end());
  return {all, val};
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

namespace {

class NetRegression {
 public:
  NetRegression(DenseNet& net, const RegressionData& data) : net_(net), data_(data) {}

  std::size_t sample_count() const { return static_cast<std::size_t>(data_.inputs.cols()); }
  Eigen::VectorXd parameters() const { return net_.parameters(); }
  void set_parameters(const Eigen::VectorXd& theta) { net_.set_parameters(theta); }

  double loss_and_grad(std::span<const std::size_t> batch, Eigen::VectorXd& grad) const {
    auto g = mse_gradient(net_, gather_columns(data_.inputs, batch), gather_columns(data_.targets, batch));
    grad += g.grad;
    return g.loss;
  }

  double loss(std::span<const std::size_t> batch) const {
    return mse(net_, gather_columns(data_.inputs, batch), gather_columns(data_.targets, batch));
  }

 private:
  DenseNet& net_;
  const RegressionData& data_;
};

}  // namespace

TrainResult train(DenseNet& net, const RegressionData& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (data.inputs.cols() != data.targets.cols()) throw Error(ErrorKind::InvalidShape, "inputs and targets differ in count");
  if (data.inputs.rows() != net.input_dim() || data.targets.rows() != net.output_dim()) {
    throw Error(ErrorKind::InvalidShape, "regression data does not match the network dimensions");
  }
  NetRegression problem(net, data);
  return train_problem(problem, cfg, on_epoch);
}

}  // namespace opnet
