#include "opnet/nn.hpp"

#include <cmath>
#include <string>

#include "opnet/errors.hpp"

namespace opnet {

namespace {

void activate(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Exp: z = z.array().exp(); break;
    case Activation::Relu: z = z.array().max(0.0); break;
  }
}

// Multiplies d_out in place by the activation derivative, expressed through
// the activation output a.
void scale_by_derivative(Eigen::MatrixXd& d, const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Tanh: d.array() *= 1.0 - a.array().square(); break;
    case Activation::Exp: d.array() *= a.array(); break;
    case Activation::Relu: d.array() *= (a.array() > 0.0).cast<double>(); break;
  }
}

void check_input(const DenseNet& net, Eigen::Index rows) {
  if (rows != net.input_dim()) {
    throw Error(ErrorKind::InvalidShape, "network expects input dimension " + std::to_string(net.input_dim()) +
                                             ", got " + std::to_string(rows));
  }
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Exp: return "exp";
    case Activation::Relu: return "relu";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "exp") return Activation::Exp;
  if (name == "relu") return Activation::Relu;
  throw Error(ErrorKind::InvalidData, "unknown activation '" + std::string(name) + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorKind::InvalidShape, "a network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) {
      throw Error(ErrorKind::InvalidShape, "layer " + std::to_string(i) + " bias does not match its weight rows");
    }
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
      throw Error(ErrorKind::InvalidShape, "layer " + std::to_string(i) + " input does not chain with layer " +
                                               std::to_string(i - 1));
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorKind::InvalidData, "layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

DenseNet DenseNet::glorot(int input_dim, int output_dim, const NetSpec& spec, Rng& rng) {
  if (input_dim < 1 || output_dim < 1) throw Error(ErrorKind::InvalidShape, "network dims must be positive");
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(output_dim);

  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int fan_in = widths[i];
    const int fan_out = widths[i + 1];
    if (fan_out < 1) throw Error(ErrorKind::InvalidShape, "hidden widths must be positive");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c) {
      for (Eigen::Index r = 0; r < fan_out; ++r) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = (i + 2 == widths.size()) ? spec.output_activation : spec.activation;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

Eigen::Index DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }

Eigen::Index DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

std::size_t DenseNet::param_count() const {
  std::size_t count = 0;
  for (const auto& l : layers_) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& x) const {
  check_input(*this, x.size());
  Eigen::MatrixXd batch = x;
  return forward_batch(batch).col(0);
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& x) const {
  check_input(*this, x.rows());
  Eigen::MatrixXd a = x;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    activate(z, l.activation);
    a = std::move(z);
  }
  return a;
}

const Eigen::MatrixXd& DenseNet::forward_batch(const Eigen::MatrixXd& x, ForwardTape& tape) const {
  check_input(*this, x.rows());
  tape.activations.resize(layers_.size() + 1);
  tape.activations[0] = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Eigen::MatrixXd& z = tape.activations[i + 1];
    z.noalias() = l.weight * tape.activations[i];
    z.colwise() += l.bias;
    activate(z, l.activation);
  }
  return tape.activations.back();
}

Eigen::MatrixXd DenseNet::backward(const ForwardTape& tape, const Eigen::MatrixXd& d_output,
                                   Eigen::Ref<Eigen::VectorXd> grad, bool want_input_grad) const {
  if (tape.activations.size() != layers_.size() + 1) {
    throw Error(ErrorKind::InvalidShape, "tape does not belong to this network");
  }
  if (grad.size() != static_cast<Eigen::Index>(param_count())) {
    throw Error(ErrorKind::InvalidShape, "gradient buffer has the wrong length");
  }
  // Offsets of each layer's block in the flat parameter vector.
  std::vector<Eigen::Index> offsets(layers_.size());
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offsets[i] = offset;
    offset += layers_[i].weight.size() + layers_[i].bias.size();
  }

  Eigen::MatrixXd delta = d_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    scale_by_derivative(delta, tape.activations[k + 1], l.activation);
    const Eigen::Index w_size = l.weight.size();
    Eigen::Map<Eigen::MatrixXd> g_w(grad.data() + offsets[k], l.weight.rows(), l.weight.cols());
    g_w.noalias() += delta * tape.activations[k].transpose();
    grad.segment(offsets[k] + w_size, l.bias.size()) += delta.rowwise().sum();
    if (k > 0 || want_input_grad) {
      Eigen::MatrixXd next = l.weight.transpose() * delta;
      delta = std::move(next);
    }
  }
  return want_input_grad ? delta : Eigen::MatrixXd();
}

Eigen::VectorXd DenseNet::parameters() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(param_count()));
  Eigen::Index offset = 0;
  for (const auto& l : layers_) {
    out.segment(offset, l.weight.size()) = l.weight.reshaped();
    offset += l.weight.size();
    out.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return out;
}

void DenseNet::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& params) {
  if (params.size() != static_cast<Eigen::Index>(param_count())) {
    throw Error(ErrorKind::InvalidShape, "parameter vector has length " + std::to_string(params.size()) +
                                             ", network has " + std::to_string(param_count()));
  }
  Eigen::Index offset = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = params.segment(offset, l.weight.size());
    offset += l.weight.size();
    l.bias = params.segment(offset, l.bias.size());
    offset += l.bias.size();
  }
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols()) {
      return false;
    }
    if (x.weight != y.weight || x.bias != y.bias) return false;
  }
  return true;
}

std::size_t param_count(int input_dim, int output_dim, const NetSpec& spec) {
  std::size_t count = 0;
  int prev = input_dim;
  for (int w : spec.hidden) {
    count += static_cast<std::size_t>(prev * w + w);
    prev = w;
  }
  count += static_cast<std::size_t>(prev * output_dim + output_dim);
  return count;
}

MseGradient mse_gradient(const DenseNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) throw Error(ErrorKind::InvalidData, "empty batch");
  if (inputs.cols() != targets.cols() || targets.rows() != net.output_dim()) {
    throw Error(ErrorKind::InvalidShape, "batch inputs and targets do not conform to the network");
  }
  ForwardTape tape;
  const Eigen::MatrixXd& out = net.forward_batch(inputs, tape);
  if (!out.allFinite()) throw NumericalFailure("non-finite activations in the forward pass");
  const double norm = 1.0 / static_cast<double>(targets.size());
  const Eigen::MatrixXd residual = out - targets;
  MseGradient result;
  result.loss = residual.squaredNorm() * norm;
  result.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.param_count()));
  net.backward(tape, (2.0 * norm) * residual, result.grad, false);
  return result;
}

double mse(const DenseNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) throw Error(ErrorKind::InvalidData, "empty batch");
  return (net.forward_batch(inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

}  // namespace opnet
