#include "dirlearn/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace dirlearn {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " differ");
  }
}

void check_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-D tensor, got " +
                     shape_str(t.shape()));
  }
}

void check_4d(const char* op, const Tensor& t, const char* name) {
  if (t.ndim() != 4) {
    throw ShapeError(std::string(op) + ": " + name + " must be 4-D, got " +
                     shape_str(t.shape()));
  }
}

// Unrolls k x k windows with the given stride into a [C*k*k x N*OH*OW]
// column-major matrix; column index (n*OH + oh)*OW + ow.
Eigen::MatrixXd im2col(const double* x, int n, int c, int h, int w, int k,
                       int stride) {
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  Eigen::MatrixXd cols(c * k * k, static_cast<Eigen::Index>(n) * oh * ow);
  for (int in = 0; in < n; ++in) {
    for (int ioh = 0; ioh < oh; ++ioh) {
      for (int iow = 0; iow < ow; ++iow) {
        double* col = cols.col((static_cast<Eigen::Index>(in) * oh + ioh) * ow + iow).data();
        for (int ic = 0; ic < c; ++ic) {
          const double* plane = x + (static_cast<size_t>(in) * c + ic) * h * w;
          for (int ki = 0; ki < k; ++ki) {
            const double* src = plane + (ioh * stride + ki) * w + iow * stride;
            std::memcpy(col + (ic * k + ki) * k, src, sizeof(double) * k);
          }
        }
      }
    }
  }
  return cols;
}

// Scatter-add inverse of im2col.
void col2im_add(const Eigen::MatrixXd& cols, double* x, int n, int c, int h,
                int w, int k, int stride) {
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  for (int in = 0; in < n; ++in) {
    for (int ioh = 0; ioh < oh; ++ioh) {
      for (int iow = 0; iow < ow; ++iow) {
        const double* col = cols.col((static_cast<Eigen::Index>(in) * oh + ioh) * ow + iow).data();
        for (int ic = 0; ic < c; ++ic) {
          double* plane = x + (static_cast<size_t>(in) * c + ic) * h * w;
          for (int ki = 0; ki < k; ++ki) {
            double* dst = plane + (ioh * stride + ki) * w + iow * stride;
            const double* src = col + (ic * k + ki) * k;
            for (int kj = 0; kj < k; ++kj) dst[kj] += src[kj];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = Tensor::from_array(a.shape(), a.values() + b.values());
  if (a.needs_grad() || b.needs_grad()) {
    tape.record(out, [a, b, out]() mutable {
      if (a.needs_grad()) a.grad() += out.grad();
      if (b.needs_grad()) b.grad() += out.grad();
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = Tensor::from_array(a.shape(), a.values() - b.values());
  if (a.needs_grad() || b.needs_grad()) {
    tape.record(out, [a, b, out]() mutable {
      if (a.needs_grad()) a.grad() += out.grad();
      if (b.needs_grad()) b.grad() -= out.grad();
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = Tensor::from_array(a.shape(), a.values() * b.values());
  if (a.needs_grad() || b.needs_grad()) {
    tape.record(out, [a, b, out]() mutable {
      if (a.needs_grad()) a.grad() += out.grad() * b.values();
      if (b.needs_grad()) b.grad() += out.grad() * a.values();
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
  Tensor out = Tensor::from_array(a.shape(), a.values() * c);
  if (a.needs_grad()) {
    tape.record(out, [a, c, out]() mutable { a.grad() += out.grad() * c; });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::from_array({1}, Array::Constant(1, a.values().sum()));
  if (a.needs_grad()) {
    tape.record(out, [a, out]() mutable { a.grad() += out.grad()[0]; });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  const double inv = 1.0 / a.numel();
  Tensor out = Tensor::from_array({1}, Array::Constant(1, a.values().sum() * inv));
  if (a.needs_grad()) {
    tape.record(out, [a, inv, out]() mutable { a.grad() += out.grad()[0] * inv; });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  Tensor out = Tensor::from_array(std::move(shape), a.values());
  if (a.needs_grad()) {
    tape.record(out, [a, out]() mutable { a.grad() += out.grad(); });
  }
  return out;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  check_2d("concat_cols", a);
  check_2d("concat_cols", b);
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("concat_cols: row counts differ on axis 0: " +
                     std::to_string(a.dim(0)) + " vs " + std::to_string(b.dim(0)));
  }
  const int n = a.dim(0), fa = a.dim(1), fb = b.dim(1);
  Tensor out = Tensor::zeros({n, fa + fb});
  auto om = out.matrix2d();
  om.leftCols(fa) = a.matrix2d();
  om.rightCols(fb) = b.matrix2d();
  if (a.needs_grad() || b.needs_grad()) {
    tape.record(out, [a, b, out, n, fa, fb]() mutable {
      ConstMatrixMap g(out.grad().data(), n, fa + fb);
      if (a.needs_grad()) MatrixMap(a.grad().data(), n, fa) += g.leftCols(fa);
      if (b.needs_grad()) MatrixMap(b.grad().data(), n, fb) += g.rightCols(fb);
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, const std::vector<int>& rows) {
  check_2d("gather_rows", x);
  const int n = x.dim(0), f = x.dim(1);
  const int k = static_cast<int>(rows.size());
  for (int r : rows) {
    if (r < 0 || r >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(r) +
                       " out of range on axis 0 (size " + std::to_string(n) + ")");
    }
  }
  Tensor out = Tensor::zeros({k, f});
  auto om = out.matrix2d();
  auto xm = x.matrix2d();
  for (int i = 0; i < k; ++i) om.row(i) = xm.row(rows[i]);
  if (x.needs_grad()) {
    tape.record(out, [x, out, rows, f, k]() mutable {
      ConstMatrixMap g(out.grad().data(), k, f);
      MatrixMap xg(x.grad().data(), x.dim(0), f);
      for (int i = 0; i < k; ++i) xg.row(rows[i]) += g.row(i);
    });
  }
  return out;
}

Tensor stack_rows0(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("stack_rows0: no tensors to stack");
  const auto& base = parts.front().shape();
  for (const Tensor& p : parts) {
    if (p.shape() != base) {
      throw ShapeError("stack_rows0: mixed shapes " + shape_str(base) + " vs " +
                       shape_str(p.shape()));
    }
  }
  std::vector<int> shape;
  shape.push_back(static_cast<int>(parts.size()));
  shape.insert(shape.end(), base.begin(), base.end());
  const int block = parts.front().numel();
  Tensor out = Tensor::zeros(shape);
  for (size_t i = 0; i < parts.size(); ++i) {
    out.values().segment(static_cast<Eigen::Index>(i) * block, block) = parts[i].values();
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.needs_grad();
  if (any) {
    tape.record(out, [parts, out, block]() mutable {
      for (size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].needs_grad()) {
          parts[i].grad() += out.grad().segment(static_cast<Eigen::Index>(i) * block, block);
        }
      }
    });
  }
  return out;
}

Tensor detach(const Tensor& x) {
  return Tensor::from_array(x.shape(), x.values());
}

Tensor grad_reverse(Tape& tape, const Tensor& x, double lambda) {
  if (lambda < 0) {
    throw ContractError("grad_reverse: lambda must be >= 0, got " +
                        std::to_string(lambda));
  }
  Tensor out = Tensor::from_array(x.shape(), x.values());
  if (x.needs_grad()) {
    tape.record(out, [x, out, lambda]() mutable {
      x.grad() += out.grad() * (-lambda);
    });
  }
  return out;
}

Tensor log_floored(Tape& tape, const Tensor& x, double floor) {
  Tensor out = Tensor::from_array(x.shape(), x.values().max(floor).log());
  if (x.needs_grad()) {
    tape.record(out, [x, out, floor]() mutable {
      x.grad() += (x.values() > floor).select(out.grad() / x.values(), 0.0);
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::from_array(x.shape(), x.values().max(0.0));
  if (x.needs_grad()) {
    tape.record(out, [x, out]() mutable {
      x.grad() += (x.values() > 0.0).select(out.grad(), 0.0);
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  check_2d("linear", x);
  check_2d("linear", w);
  const int n = x.dim(0), f = x.dim(1), o = w.dim(0);
  if (w.dim(1) != f) {
    throw ShapeError("linear: input features " + std::to_string(f) +
                     " != weight features " + std::to_string(w.dim(1)) +
                     " on axis 1");
  }
  if (b.numel() != o) {
    throw ShapeError("linear: bias size " + std::to_string(b.numel()) +
                     " != output features " + std::to_string(o));
  }
  Tensor out = Tensor::zeros({n, o});
  auto xm = x.matrix2d();
  auto wm = w.matrix2d();
  out.matrix2d().noalias() = xm * wm.transpose();
  out.matrix2d().rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(b.values().data(), o);
  if (x.needs_grad() || w.needs_grad() || b.needs_grad()) {
    tape.record(out, [x, w, b, out, n, f, o]() mutable {
      ConstMatrixMap g(out.grad().data(), n, o);
      if (x.needs_grad()) {
        MatrixMap(x.grad().data(), n, f).noalias() += g * w.matrix2d();
      }
      if (w.needs_grad()) {
        MatrixMap(w.grad().data(), o, f).noalias() += g.transpose() * x.matrix2d();
      }
      if (b.needs_grad()) {
        Eigen::Map<Eigen::RowVectorXd>(b.grad().data(), o) += g.colwise().sum();
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x) {
  check_2d("softmax", x);
  const int n = x.dim(0), c = x.dim(1);
  Tensor out = Tensor::zeros({n, c});
  auto xm = x.matrix2d();
  auto om = out.matrix2d();
  for (int i = 0; i < n; ++i) {
    const double mx = xm.row(i).maxCoeff();
    om.row(i) = (xm.row(i).array() - mx).exp();
    om.row(i) /= om.row(i).sum();
  }
  if (x.needs_grad()) {
    tape.record(out, [x, out, n, c]() mutable {
      ConstMatrixMap g(out.grad().data(), n, c);
      ConstMatrixMap p(out.values().data(), n, c);
      MatrixMap xg(x.grad().data(), n, c);
      for (int i = 0; i < n; ++i) {
        const double dot = g.row(i).dot(p.row(i));
        xg.row(i).array() += p.row(i).array() * (g.row(i).array() - dot);
      }
    });
  }
  return out;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
  check_2d("log_softmax", x);
  const int n = x.dim(0), c = x.dim(1);
  Tensor out = Tensor::zeros({n, c});
  auto xm = x.matrix2d();
  auto om = out.matrix2d();
  for (int i = 0; i < n; ++i) {
    const double mx = xm.row(i).maxCoeff();
    const double lse = std::log((xm.row(i).array() - mx).exp().sum()) + mx;
    om.row(i) = xm.row(i).array() - lse;
  }
  if (x.needs_grad()) {
    tape.record(out, [x, out, n, c]() mutable {
      ConstMatrixMap g(out.grad().data(), n, c);
      ConstMatrixMap lp(out.values().data(), n, c);
      MatrixMap xg(x.grad().data(), n, c);
      for (int i = 0; i < n; ++i) {
        const double gs = g.row(i).sum();
        xg.row(i).array() += g.row(i).array() - lp.row(i).array().exp() * gs;
      }
    });
  }
  return out;
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  check_4d("conv2d", x, "input");
  check_4d("conv2d", w, "weight");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                     " != weight channels " + std::to_string(w.dim(1)) +
                     " on axis 1");
  }
  if (w.dim(3) != k) {
    throw ShapeError("conv2d: kernel must be square, got " +
                     std::to_string(k) + "x" + std::to_string(w.dim(3)));
  }
  if (k > h) throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds input height " + std::to_string(h));
  if (k > wd) throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds input width " + std::to_string(wd));
  if (b.numel() != cout) {
    throw ShapeError("conv2d: bias size " + std::to_string(b.numel()) +
                     " != output channels " + std::to_string(cout));
  }
  const int oh = h - k + 1, ow = wd - k + 1;

  auto cols = std::make_shared<Eigen::MatrixXd>(
      im2col(x.values().data(), n, cin, h, wd, k, 1));
  ConstMatrixMap wmat(w.values().data(), cout, cin * k * k);
  RowMajorMatrix out_mat = wmat * (*cols);  // [cout x n*oh*ow]

  Tensor out = Tensor::zeros({n, cout, oh, ow});
  double* od = out.values().data();
  const int plane = oh * ow;
  for (int in = 0; in < n; ++in) {
    for (int co = 0; co < cout; ++co) {
      const double* src = out_mat.data() + (static_cast<size_t>(co) * n + in) * plane;
      double* dst = od + (static_cast<size_t>(in) * cout + co) * plane;
      const double bias = b.values()[co];
      for (int i = 0; i < plane; ++i) dst[i] = src[i] + bias;
    }
  }

  if (x.needs_grad() || w.needs_grad() || b.needs_grad()) {
    tape.record(out, [x, w, b, out, cols, n, cin, h, wd, cout, k, oh, ow]() mutable {
      const int plane = oh * ow;
      RowMajorMatrix gmat(cout, static_cast<Eigen::Index>(n) * plane);
      const double* gd = out.grad().data();
      for (int in = 0; in < n; ++in) {
        for (int co = 0; co < cout; ++co) {
          std::memcpy(gmat.data() + (static_cast<size_t>(co) * n + in) * plane,
                      gd + (static_cast<size_t>(in) * cout + co) * plane,
                      sizeof(double) * plane);
        }
      }
      if (b.needs_grad()) {
        for (int co = 0; co < cout; ++co) b.grad()[co] += gmat.row(co).sum();
      }
      if (w.needs_grad()) {
        MatrixMap(w.grad().data(), cout, cin * k * k).noalias() +=
            gmat * cols->transpose();
      }
      if (x.needs_grad()) {
        ConstMatrixMap wmat(w.values().data(), cout, cin * k * k);
        Eigen::MatrixXd gcols = wmat.transpose() * gmat;
        col2im_add(gcols, x.grad().data(), n, cin, h, wd, k, 1);
      }
    });
  }
  return out;
}

Tensor conv_transpose2d(Tape& tape, const Tensor& x, const Tensor& w,
                        const Tensor& b, int stride) {
  check_4d("conv_transpose2d", x, "input");
  check_4d("conv_transpose2d", w, "weight");
  if (stride < 1) throw ContractError("conv_transpose2d: stride must be >= 1");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(1), k = w.dim(2);
  if (w.dim(0) != cin) {
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(cin) +
                     " != weight channels " + std::to_string(w.dim(0)) +
                     " on axis 0");
  }
  if (w.dim(3) != k) {
    throw ShapeError("conv_transpose2d: kernel must be square");
  }
  if (b.numel() != cout) {
    throw ShapeError("conv_transpose2d: bias size " + std::to_string(b.numel()) +
                     " != output channels " + std::to_string(cout));
  }
  const int oh = (h - 1) * stride + k, ow = (wd - 1) * stride + k;

  // Gather x into [cin x n*h*w] with per-image channel planes contiguous.
  auto xmat = std::make_shared<RowMajorMatrix>(cin, static_cast<Eigen::Index>(n) * h * wd);
  const int in_plane = h * wd;
  for (int in = 0; in < n; ++in) {
    for (int ci = 0; ci < cin; ++ci) {
      std::memcpy(xmat->data() + (static_cast<size_t>(ci) * n + in) * in_plane,
                  x.values().data() + (static_cast<size_t>(in) * cin + ci) * in_plane,
                  sizeof(double) * in_plane);
    }
  }
  ConstMatrixMap wmat(w.values().data(), cin, cout * k * k);
  Eigen::MatrixXd prod = wmat.transpose() * (*xmat);  // [cout*k*k x n*h*w]

  Tensor out = Tensor::zeros({n, cout, oh, ow});
  col2im_add(prod, out.values().data(), n, cout, oh, ow, k, stride);
  const int out_plane = oh * ow;
  for (int in = 0; in < n; ++in) {
    for (int co = 0; co < cout; ++co) {
      double* dst = out.values().data() + (static_cast<size_t>(in) * cout + co) * out_plane;
      const double bias = b.values()[co];
      for (int i = 0; i < out_plane; ++i) dst[i] += bias;
    }
  }

  if (x.needs_grad() || w.needs_grad() || b.needs_grad()) {
    tape.record(out, [x, w, b, out, xmat, n, cin, h, wd, cout, k, oh, ow, stride]() mutable {
      Eigen::MatrixXd gcols =
          im2col(out.grad().data(), n, cout, oh, ow, k, stride);
      if (b.needs_grad()) {
        const int out_plane = oh * ow;
        for (int in = 0; in < n; ++in) {
          for (int co = 0; co < cout; ++co) {
            const double* g = out.grad().data() + (static_cast<size_t>(in) * cout + co) * out_plane;
            double acc = 0;
            for (int i = 0; i < out_plane; ++i) acc += g[i];
            b.grad()[co] += acc;
          }
        }
      }
      if (w.needs_grad()) {
        MatrixMap(w.grad().data(), cin, cout * k * k).noalias() +=
            (*xmat) * gcols.transpose();
      }
      if (x.needs_grad()) {
        ConstMatrixMap wmat(w.values().data(), cin, cout * k * k);
        RowMajorMatrix gx = wmat * gcols;  // [cin x n*h*w]
        const int in_plane = h * wd;
        for (int in = 0; in < n; ++in) {
          for (int ci = 0; ci < cin; ++ci) {
            double* dst = x.grad().data() + (static_cast<size_t>(in) * cin + ci) * in_plane;
            const double* src = gx.data() + (static_cast<size_t>(ci) * n + in) * in_plane;
            for (int i = 0; i < in_plane; ++i) dst[i] += src[i];
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool2d(Tape& tape, const Tensor& x, int k, int stride) {
  check_4d("maxpool2d", x, "input");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < k) throw ShapeError("maxpool2d: input height " + std::to_string(h) + " < kernel " + std::to_string(k));
  if (w < k) throw ShapeError("maxpool2d: input width " + std::to_string(w) + " < kernel " + std::to_string(k));
  const int oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  Tensor out = Tensor::zeros({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(n) * c * oh * ow);
  const double* xd = x.values().data();
  double* od = out.values().data();
  size_t oi = 0;
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      const double* plane = xd + (static_cast<size_t>(in) * c + ic) * h * w;
      const int plane_off = static_cast<int>((static_cast<size_t>(in) * c + ic) * h * w);
      for (int ioh = 0; ioh < oh; ++ioh) {
        for (int iow = 0; iow < ow; ++iow, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          int best_idx = -1;
          for (int ki = 0; ki < k; ++ki) {
            const int row = ioh * stride + ki;
            for (int kj = 0; kj < k; ++kj) {
              const int idx = row * w + iow * stride + kj;
              if (plane[idx] > best) {  // strict: first occurrence wins ties
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          od[oi] = best;
          (*argmax)[oi] = plane_off + best_idx;
        }
      }
    }
  }
  if (x.needs_grad()) {
    tape.record(out, [x, out, argmax]() mutable {
      const double* g = out.grad().data();
      double* xg = x.grad().data();
      for (size_t i = 0; i < argmax->size(); ++i) xg[(*argmax)[i]] += g[i];
    });
  }
  return out;
}

Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma,
                   const Tensor& beta, BatchNormState& state, bool train) {
  check_4d("batchnorm2d", x, "input");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("batchnorm2d: gamma/beta size must equal channels " +
                     std::to_string(c));
  }
  if (state.running_mean.size() != c) {
    throw ShapeError("batchnorm2d: running stats sized " +
                     std::to_string(state.running_mean.size()) +
                     ", expected " + std::to_string(c));
  }
  const int m = n * h * w;
  if (train && m < 2) {
    throw DegenerateBatchError(
        "batchnorm2d: train mode needs at least 2 values per channel, got " +
        std::to_string(m));
  }

  Array mean_c(c), var_c(c);
  if (train) {
    for (int ic = 0; ic < c; ++ic) {
      double s = 0, s2 = 0;
      for (int in = 0; in < n; ++in) {
        const double* plane = x.values().data() + (static_cast<size_t>(in) * c + ic) * h * w;
        for (int i = 0; i < h * w; ++i) {
          s += plane[i];
          s2 += plane[i] * plane[i];
        }
      }
      const double mu = s / m;
      mean_c[ic] = mu;
      var_c[ic] = s2 / m - mu * mu;  // biased
      if (var_c[ic] < 0) var_c[ic] = 0;
    }
    state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * mean_c;
    state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * var_c;
  } else {
    mean_c = state.running_mean;
    var_c = state.running_var;
  }

  Array inv_std = (var_c + state.eps).sqrt().inverse();
  Tensor out = Tensor::zeros({n, c, h, w});
  auto xhat = std::make_shared<Array>(x.numel());
  {
    double* xh = xhat->data();
    double* od = out.values().data();
    const double* xd = x.values().data();
    for (int in = 0; in < n; ++in) {
      for (int ic = 0; ic < c; ++ic) {
        const size_t off = (static_cast<size_t>(in) * c + ic) * h * w;
        const double mu = mean_c[ic], is = inv_std[ic];
        const double g = gamma.values()[ic], bt = beta.values()[ic];
        for (int i = 0; i < h * w; ++i) {
          const double xv = (xd[off + i] - mu) * is;
          xh[off + i] = xv;
          od[off + i] = g * xv + bt;
        }
      }
    }
  }

  if (x.needs_grad() || gamma.needs_grad() || beta.needs_grad()) {
    Array inv_std_copy = inv_std;
    tape.record(out, [x, gamma, beta, out, xhat, inv_std_copy, n, c, h, w, m, train]() mutable {
      const double* g = out.grad().data();
      const double* xh = xhat->data();
      for (int ic = 0; ic < c; ++ic) {
        double sum_g = 0, sum_gx = 0;
        for (int in = 0; in < n; ++in) {
          const size_t off = (static_cast<size_t>(in) * c + ic) * h * w;
          for (int i = 0; i < h * w; ++i) {
            sum_g += g[off + i];
            sum_gx += g[off + i] * xh[off + i];
          }
        }
        if (gamma.needs_grad()) gamma.grad()[ic] += sum_gx;
        if (beta.needs_grad()) beta.grad()[ic] += sum_g;
        if (x.needs_grad()) {
          const double gam = gamma.values()[ic];
          const double is = inv_std_copy[ic];
          if (train) {
            // d/dx through the batch statistics.
            const double c1 = gam * is / m;
            for (int in = 0; in < n; ++in) {
              const size_t off = (static_cast<size_t>(in) * c + ic) * h * w;
              double* xg = x.grad().data();
              for (int i = 0; i < h * w; ++i) {
                xg[off + i] += c1 * (m * g[off + i] - sum_g - xh[off + i] * sum_gx);
              }
            }
          } else {
            const double c1 = gam * is;
            for (int in = 0; in < n; ++in) {
              const size_t off = (static_cast<size_t>(in) * c + ic) * h * w;
              double* xg = x.grad().data();
              for (int i = 0; i < h * w; ++i) xg[off + i] += c1 * g[off + i];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace dirlearn
