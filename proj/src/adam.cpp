#include "opnet/adam.hpp"

#include <cmath>
#include <string>

#include "opnet/errors.hpp"

namespace opnet {

AdamState AdamState::fresh(Eigen::Index size, const AdamConfig& config) {
  AdamState state;
  state.m = Eigen::VectorXd::Zero(size);
  state.v = Eigen::VectorXd::Zero(size);
  state.lr = config.lr;
  state.beta1 = config.beta1;
  state.beta2 = config.beta2;
  state.epsilon = config.epsilon;
  return state;
}

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorKind::InvalidShape, "Adam: parameter, gradient and moment sizes differ (" +
                                             std::to_string(params.size()) + ", " + std::to_string(grads.size()) +
                                             ", " + std::to_string(state.m.size()) + ")");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double m_corr = 1.0 / (1.0 - std::pow(state.beta1, t));
  const double v_corr = 1.0 / (1.0 - std::pow(state.beta2, t));
  params.array() -= state.lr * (state.m.array() * m_corr) / ((state.v.array() * v_corr).sqrt() + state.epsilon);
}

}  // namespace opnet
