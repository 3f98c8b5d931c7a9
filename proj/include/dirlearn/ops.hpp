#pragma once

#include <vector>

#include "dirlearn/tensor.hpp"

namespace dirlearn {

// Differentiable primitives. Every op validates shapes, computes the forward
// value, and (when any input participates in the graph) records its backward
// step on the tape. Gradients accumulate across fan-out.

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
Tensor reshape(Tape& tape, const Tensor& a, std::vector<int> shape);

/// [N,Fa] ++ [N,Fb] -> [N,Fa+Fb]; the latent concatenation s (+) v.
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);

/// Row gather with repetition allowed; backward scatter-adds.
Tensor gather_rows(Tape& tape, const Tensor& x, const std::vector<int>& rows);

/// Stacks K same-shape tensors along a new leading axis.
Tensor stack_rows0(Tape& tape, const std::vector<Tensor>& parts);

/// Leaf copy that blocks gradient flow.
Tensor detach(const Tensor& x);

/// Identity forward; backward multiplies the upstream gradient by -lambda.
Tensor grad_reverse(Tape& tape, const Tensor& x, double lambda);

/// log(max(x, floor)) elementwise; zero gradient on floored entries.
Tensor log_floored(Tape& tape, const Tensor& x, double floor = 1e-12);

Tensor relu(Tape& tape, const Tensor& x);

/// x[N,F] * w[O,F]^T + b[O] -> [N,O].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

/// Row-wise softmax on [N,C], max-subtracted for stability.
Tensor softmax(Tape& tape, const Tensor& x);
Tensor log_softmax(Tape& tape, const Tensor& x);

/// Valid cross-correlation, stride 1: x[N,Cin,H,W] * w[Cout,Cin,k,k] + b[Cout]
/// -> [N,Cout,H-k+1,W-k+1].
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

/// Transposed convolution: x[N,Cin,H,W] * w[Cin,Cout,k,k] + b[Cout]
/// -> [N,Cout,(H-1)*stride+k,(W-1)*stride+k].
Tensor conv_transpose2d(Tape& tape, const Tensor& x, const Tensor& w,
                        const Tensor& b, int stride);

/// Windowed maxima with trailing remainder truncated; backward routes each
/// gradient to the window argmax, first occurrence in row-major order.
Tensor maxpool2d(Tape& tape, const Tensor& x, int k = 2, int stride = 2);

/// Per-channel normalization statistics carried across batches.
struct BatchNormState {
  Array running_mean;
  Array running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(int channels = 0)
      : running_mean(Array::Zero(channels)),
        running_var(Array::Ones(channels)) {}
};

/// Train mode: normalize by the batch's per-channel mean and biased variance
/// and update the running stats. Eval mode: normalize by the running stats.
Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma,
                   const Tensor& beta, BatchNormState& state, bool train);

}  // namespace dirlearn
