#include "dirlearn/optim.hpp"

#include <cmath>

namespace dirlearn {

double lr_schedule(int epoch, const OptimConfig& config) {
  if (epoch < 0) throw ContractError("lr_schedule: epoch must be >= 0");
  switch (config.schedule) {
    case ScheduleKind::Constant:
      return config.lr;
    case ScheduleKind::Warmup: {
      const double frac =
          std::min(1.0, static_cast<double>(epoch) / config.warmup_epochs);
      return config.lr * frac;
    }
    case ScheduleKind::Step:
      return epoch >= config.milestone ? config.lr * 0.1 : config.lr;
  }
  throw ContractError("lr_schedule: unknown schedule");
}

Optimizer::Optimizer(OptimConfig config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
  moment1_.reserve(params_.size());
  moment2_.reserve(params_.size());
  for (const Tensor& p : params_) {
    moment1_.push_back(Array::Zero(p.numel()));
    moment2_.push_back(Array::Zero(p.numel()));
  }
}

void Optimizer::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Optimizer::step() {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].grad().isFinite().all()) {
      throw PoisonedStateError("optimizer: non-finite gradient in parameter " +
                               std::to_string(i) + "; step refused");
    }
  }
  ++step_;
  for (size_t i = 0; i < params_.size(); ++i) {
    Array& g = params_[i].grad();
    Array& v = params_[i].values();
    switch (config_.kind) {
      case OptimizerKind::SgdMomentum: {
        moment1_[i] = config_.momentum * moment1_[i] + g;
        v -= config_.lr * moment1_[i];
        break;
      }
      case OptimizerKind::Adam: {
        moment1_[i] = config_.beta1 * moment1_[i] + (1.0 - config_.beta1) * g;
        moment2_[i] =
            config_.beta2 * moment2_[i] + (1.0 - config_.beta2) * g.square();
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
        v -= config_.lr * (moment1_[i] / bc1) /
             ((moment2_[i] / bc2).sqrt() + config_.eps);
        break;
      }
    }
  }
}

}  // namespace dirlearn
