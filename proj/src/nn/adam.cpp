#include "spectradiff/nn/adam.hpp"

#include "spectradiff/errors.hpp"

#include <cmath>

namespace spectradiff::nn {

AdamState::AdamState(Real lr, Real b1, Real b2, Real eps)
    : learning_rate(lr), beta1(b1), beta2(b2), epsilon(eps) {
  if (!(lr > 0)) throw ArgumentError("adam: learning rate must be > 0");
  if (!(b1 > 0 && b1 < 1 && b2 > 0 && b2 < 1)) {
    throw ArgumentError("adam: betas must lie in (0, 1)");
  }
  if (!(eps > 0)) throw ArgumentError("adam: epsilon must be > 0");
}

void adam_step(AdamState& state, const ParamStore& params) {
  for (const auto& [path, p] : params) {
    if (!p->grad.flat().allFinite()) {
      throw TrainingError("non-finite gradient in parameter " + path);
    }
  }
  ++state.step;
  const Real t = Real(state.step);
  const Real correction1 = Real(1) - std::pow(state.beta1, t);
  const Real correction2 = Real(1) - std::pow(state.beta2, t);
  for (const auto& [path, p] : params) {
    auto& m = state.moments[path];
    if (m.first.size() != p->value.size()) {
      m.first = Vector::Zero(p->value.size());
      m.second = Vector::Zero(p->value.size());
    }
    const Vector& g = p->grad.flat();
    m.first = state.beta1 * m.first + (Real(1) - state.beta1) * g;
    m.second = state.beta2 * m.second + (Real(1) - state.beta2) * g.cwiseAbs2();
    p->value.flat().array() -= state.learning_rate * (m.first.array() / correction1) /
                               ((m.second.array() / correction2).sqrt() + state.epsilon);
    p->grad.flat().setZero();
  }
}

}  // namespace spectradiff::nn
