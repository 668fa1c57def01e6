#pragma once

#include "spectradiff/nn/layers.hpp"

#include <map>
#include <string>

namespace spectradiff::nn {

/// Adam optimizer state. Moments are keyed by parameter path so the state
/// survives rebuilding the (non-owning) ParamStore.
struct AdamState {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
  long step = 0;

  struct Moments {
    Vector first;
    Vector second;
  };
  std::map<std::string, Moments> moments;

  AdamState() = default;
  explicit AdamState(Real lr, Real b1 = 0.9, Real b2 = 0.999, Real eps = 1e-8);
};

/// One bias-corrected Adam update of every parameter in `params`, followed by
/// zeroing the gradients. Throws TrainingError naming the first parameter
/// with a non-finite gradient, before anything is modified.
void adam_step(AdamState& state, const ParamStore& params);

}  // namespace spectradiff::nn
