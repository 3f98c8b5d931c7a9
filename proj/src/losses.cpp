#include "dirlearn/losses.hpp"

#include <cmath>
#include <sstream>

namespace dirlearn {

std::string loss_report_jsonl(int step, const LossReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"step\":" << step << ",\"name\":\"" << report.name
     << "\",\"value\":" << report.value << "}";
  return os.str();
}

Tensor ce_label_smoothing(Tape& tape, const Tensor& logits,
                          const std::vector<int>& targets, double eps,
                          Reduction reduction) {
  if (logits.ndim() != 2) {
    throw ShapeError("ce_label_smoothing: logits must be [N,C], got " +
                     shape_str(logits.shape()));
  }
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(targets.size()) != n) {
    throw ShapeError("ce_label_smoothing: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " rows");
  }
  if (eps < 0.0 || eps >= 1.0) {
    throw ContractError("ce_label_smoothing: epsilon must lie in [0,1)");
  }
  Tensor q = Tensor::full({n, c}, eps / c);
  auto qm = q.matrix2d();
  for (int i = 0; i < n; ++i) {
    const int t = targets[i];
    if (t < 0 || t >= c) {
      throw ContractError("ce_label_smoothing: target " + std::to_string(t) +
                          " out of range for " + std::to_string(c) +
                          " classes at row " + std::to_string(i));
    }
    qm(i, t) += 1.0 - eps;
  }
  Tensor logp = log_softmax(tape, logits);
  Tensor weighted = mul(tape, logp, q);
  Tensor total = sum(tape, weighted);
  const double factor = reduction == Reduction::MeanOverBatch ? -1.0 / n : -1.0;
  return scale(tape, total, factor);
}

Tensor conditional_entropy(Tape& tape, const Tensor& posteriors,
                           Reduction reduction) {
  if (posteriors.ndim() != 2) {
    throw ShapeError("conditional_entropy: posteriors must be [N,C], got " +
                     shape_str(posteriors.shape()));
  }
  const int n = posteriors.dim(0);
  auto pm = posteriors.matrix2d();
  for (int i = 0; i < n; ++i) {
    if (pm.row(i).minCoeff() < 0.0) {
      throw ContractError("conditional_entropy: negative entry in row " +
                          std::to_string(i));
    }
    const double s = pm.row(i).sum();
    if (std::abs(s - 1.0) > 1e-6) {
      throw ContractError("conditional_entropy: row " + std::to_string(i) +
                          " sums to " + std::to_string(s));
    }
  }
  Tensor logp = log_floored(tape, posteriors);
  Tensor plogp = mul(tape, posteriors, logp);
  Tensor total = sum(tape, plogp);
  const double factor = reduction == Reduction::MeanOverBatch ? -1.0 / n : -1.0;
  return scale(tape, total, factor);
}

Tensor indistinguishability_loss(Tape& tape, const Tensor& posteriors,
                                 Reduction reduction) {
  return scale(tape, conditional_entropy(tape, posteriors, reduction), -1.0);
}

Tensor invar_loss(Tape& tape, const Tensor& stacked_logits,
                  const std::vector<int>& targets, double label_smoothing,
                  Reduction reduction) {
  if (stacked_logits.ndim() != 3) {
    throw ShapeError("invar_loss: expected [K,N,M] logits, got " +
                     shape_str(stacked_logits.shape()));
  }
  const int k = stacked_logits.dim(0);
  const int n = stacked_logits.dim(1);
  const int m = stacked_logits.dim(2);
  if (k < 1) throw ContractError("invar_loss: K must be >= 1");
  if (static_cast<int>(targets.size()) != n) {
    throw ShapeError("invar_loss: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " samples");
  }
  Tensor flat = reshape(tape, stacked_logits, {k * n, m});
  std::vector<int> tiled(static_cast<size_t>(k) * n);
  for (int ik = 0; ik < k; ++ik) {
    for (int i = 0; i < n; ++i) tiled[static_cast<size_t>(ik) * n + i] = targets[i];
  }
  Tensor total =
      ce_label_smoothing(tape, flat, tiled, label_smoothing, Reduction::Sum);
  if (reduction == Reduction::MeanOverBatch) {
    return scale(tape, total, 1.0 / n);
  }
  return total;
}

MiReport mi_plugin(Tape& tape, const Tensor& posteriors,
                   const std::vector<int>& domain_labels) {
  if (posteriors.ndim() != 2) {
    throw ShapeError("mi_plugin: posteriors must be [N,G], got " +
                     shape_str(posteriors.shape()));
  }
  const int n = posteriors.dim(0), g = posteriors.dim(1);
  if (n == 0) throw ContractError("mi_plugin: empty batch");
  if (static_cast<int>(domain_labels.size()) != n) {
    throw ShapeError("mi_plugin: " + std::to_string(domain_labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  // Empirical marginal entropy of the labels; depends on labels only.
  std::vector<double> counts(static_cast<size_t>(g), 0.0);
  for (int lab : domain_labels) {
    if (lab < 0 || lab >= g) {
      throw ContractError("mi_plugin: label " + std::to_string(lab) +
                          " out of range for " + std::to_string(g) + " domains");
    }
    counts[static_cast<size_t>(lab)] += 1.0;
  }
  double h_d = 0.0;
  for (double cnt : counts) {
    if (cnt > 0) {
      const double p = cnt / n;
      h_d -= p * std::log(p);
    }
  }
  MiReport report;
  report.h_d = Tensor::full({1}, h_d);
  report.h_d_given_s =
      conditional_entropy(tape, posteriors, Reduction::MeanOverBatch);
  report.i_hat = sub(tape, report.h_d, report.h_d_given_s);
  return report;
}

Tensor recon_loss(Tape& tape, const Tensor& reconstruction,
                  const Tensor& target) {
  if (reconstruction.shape() != target.shape()) {
    throw ShapeError("recon_loss: shapes " + shape_str(reconstruction.shape()) +
                     " and " + shape_str(target.shape()) + " differ");
  }
  Tensor diff = sub(tape, reconstruction, target);
  Tensor sq = mul(tape, diff, diff);
  return mean(tape, sq);
}

}  // namespace dirlearn
