#pragma once

#include <string>
#include <vector>

#include "dirlearn/tensor.hpp"

namespace dirlearn {

enum class OptimizerKind { SgdMomentum, Adam };

enum class ScheduleKind { Constant, Warmup, Step };

struct OptimConfig {
  OptimizerKind kind = OptimizerKind::SgdMomentum;
  double lr = 0.02;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  ScheduleKind schedule = ScheduleKind::Constant;
  int warmup_epochs = 100;  // warmup: lr scales linearly up to this epoch
  int milestone = 100;      // step: lr divided by 10 from this epoch on
};

/// Learning rate for a 1-indexed epoch under the configured schedule.
double lr_schedule(int epoch, const OptimConfig& config);

/// Owns per-parameter moment buffers and applies updates in place. Refuses
/// to step when any gradient is non-finite.
class Optimizer {
 public:
  Optimizer(OptimConfig config, std::vector<Tensor> params);

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  std::int64_t step_count() const { return step_; }
  const std::vector<Tensor>& params() const { return params_; }

  void zero_grad();

  /// One update from the gradients currently attached to the parameters.
  void step();

 private:
  OptimConfig config_;
  std::vector<Tensor> params_;
  std::vector<Array> moment1_;  // sgd velocity / adam m
  std::vector<Array> moment2_;  // adam v
  std::int64_t step_ = 0;
};

}  // namespace dirlearn
