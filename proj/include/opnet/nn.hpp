#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "opnet/rng.hpp"

namespace opnet {

enum class Activation { Identity, Tanh, Exp, Relu };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::Identity;
};

/// Hidden widths plus activations; input/output dims are supplied by the caller.
struct NetSpec {
  std::vector<int> hidden;
  Activation activation = Activation::Tanh;
  Activation output_activation = Activation::Identity;

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// Cached layer outputs from a batched forward pass; entry 0 is the input.
struct ForwardTape {
  std::vector<Eigen::MatrixXd> activations;
};

/// Chain-structured feed-forward network. Batches are passed column-wise
/// (features x samples). Parameters flatten layer by layer as the
/// column-major weight followed by the bias.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseNet glorot(int input_dim, int output_dim, const NetSpec& spec, Rng& rng);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t param_count() const;
  std::size_t depth() const { return layers_.size(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  const Eigen::MatrixXd& forward_batch(const Eigen::MatrixXd& x, ForwardTape& tape) const;

  /// Reverse pass. Adds the parameter gradient into `grad` (length
  /// param_count()) and returns the gradient with respect to the input.
  Eigen::MatrixXd backward(const ForwardTape& tape, const Eigen::MatrixXd& d_output, Eigen::Ref<Eigen::VectorXd> grad,
                           bool want_input_grad = true) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& params);

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  std::vector<DenseLayer> layers_;
};

std::size_t param_count(int input_dim, int output_dim, const NetSpec& spec);

struct MseGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Loss (1 / (N * output_dim)) * sum ||f(x) - y||^2 and its parameter gradient.
MseGradient mse_gradient(const DenseNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

double mse(const DenseNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

}  // namespace opnet
