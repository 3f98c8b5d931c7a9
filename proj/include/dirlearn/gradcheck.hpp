#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dirlearn/tensor.hpp"

namespace dirlearn::gradcheck {

/// Builds a scalar loss from the (trainable) inputs on the given tape.
using LossBuilder = std::function<Tensor(Tape&, std::vector<Tensor>&)>;

/// Compares the analytic gradient of the builder's loss against central
/// finite differences with step h, element by element, over every input that
/// requires grad. Returns the worst relative error, where
/// rel = |analytic - fd| / max(|analytic|, |fd|, 1e-3).
double max_rel_error(const LossBuilder& builder, std::vector<Tensor> inputs,
                     double h = 1e-5);

struct Result {
  std::string name;
  double max_rel_err = 0.0;
  int instances = 0;
};

/// Finite-difference suite over every differentiable primitive and loss,
/// `instances_per_op` randomized instances each.
std::vector<Result> run_all(int instances_per_op, std::uint64_t seed);

}  // namespace dirlearn::gradcheck
