#pragma once

#include <string>
#include <vector>

#include "dirlearn/ops.hpp"
#include "dirlearn/tensor.hpp"

namespace dirlearn {

/// One named scalar objective evaluated on a batch.
struct LossReport {
  std::string name;
  double value = 0.0;
  int batch_size = 0;
};

/// Serialized as one JSONL row: {"step":..,"name":..,"value":..}.
std::string loss_report_jsonl(int step, const LossReport& report);

enum class Reduction { Sum, MeanOverBatch };

/// Cross-entropy against smoothed targets q = (1-eps)*onehot + eps/C,
/// natural log, batch-meaned by default.
Tensor ce_label_smoothing(Tape& tape, const Tensor& logits,
                          const std::vector<int>& targets, double eps,
                          Reduction reduction = Reduction::MeanOverBatch);

/// H = sum_i sum_k -p_ik ln p_ik over posterior rows (each summing to 1).
/// Sum reduction is the paper's batch-summed form; MeanOverBatch divides by N.
Tensor conditional_entropy(Tape& tape, const Tensor& posteriors,
                           Reduction reduction = Reduction::Sum);

/// Negative conditional entropy; minimizing it pushes rows toward uniform.
Tensor indistinguishability_loss(Tape& tape, const Tensor& posteriors,
                                 Reduction reduction = Reduction::Sum);

/// Sum over K adjusted factors and the batch of -log P(y_i | logits[k,i,:]).
/// MeanOverBatch divides by N only (the K-sum is part of the objective).
Tensor invar_loss(Tape& tape, const Tensor& stacked_logits,
                  const std::vector<int>& targets, double label_smoothing = 0.0,
                  Reduction reduction = Reduction::Sum);

/// Plug-in mutual information between a posterior and labels:
/// i_hat = h_d - h_d_given_s exactly, with h_d from the empirical marginal.
struct MiReport {
  Tensor i_hat;
  Tensor h_d;          // constant w.r.t. the posteriors
  Tensor h_d_given_s;  // per-sample mean conditional entropy
};
MiReport mi_plugin(Tape& tape, const Tensor& posteriors,
                   const std::vector<int>& domain_labels);

/// Mean squared error.
Tensor recon_loss(Tape& tape, const Tensor& reconstruction,
                  const Tensor& target);

}  // namespace dirlearn
