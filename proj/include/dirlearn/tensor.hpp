#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "dirlearn/errors.hpp"

namespace dirlearn {

using Array = Eigen::ArrayXd;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

/// Dense n-dimensional array of 64-bit floats, row-major, with an attached
/// same-shape gradient buffer. Copies are shallow: two handles to the same
/// tensor share both values and gradient.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from_array(std::vector<int> shape, Array values);
  /// Leaf with requires_grad set; the usual constructor for parameters.
  static Tensor param(std::vector<int> shape, Array values);

  bool defined() const { return impl_ != nullptr; }

  const std::vector<int>& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int axis) const { return impl_->shape[static_cast<size_t>(axis)]; }
  int numel() const { return static_cast<int>(impl_->values.size()); }

  Array& values() { return impl_->values; }
  const Array& values() const { return impl_->values; }
  /// Gradient buffer; writable through const handles, matching the shared
  /// ownership of the underlying storage.
  Array& grad() const { return impl_->grad; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

  /// True when a backward pass must propagate through this tensor: either a
  /// trainable leaf or the output of a recorded op.
  bool needs_grad() const { return impl_->requires_grad || impl_->on_graph; }
  void mark_on_graph() { impl_->on_graph = true; }

  void zero_grad() const { impl_->grad.setZero(); }

  /// Value of a single-element tensor.
  double scalar_value() const;

  /// 2-D matrix view of the row-major buffer, [rows x cols].
  MatrixMap matrix(int rows, int cols);
  ConstMatrixMap matrix(int rows, int cols) const;
  /// View with rows = shape[0].
  MatrixMap matrix2d();
  ConstMatrixMap matrix2d() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    std::vector<int> shape;
    Array values;
    Array grad;
    bool requires_grad = false;
    bool on_graph = false;
  };

  std::shared_ptr<Impl> impl_;

  friend class Tape;
  const void* id() const { return impl_.get(); }
};

/// Ordered record of executed primitive ops. Each op appends a closure that
/// propagates output gradients to input gradients; backward() replays them
/// in reverse, accumulating (summing) across fan-out.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool flag) { recording_ = flag; }

  /// Registers `out` as produced by this tape and stores its backward step.
  void record(Tensor& out, std::function<void()> backward_step);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. The loss must
  /// be a scalar produced by this tape.
  void backward(const Tensor& loss);

  size_t size() const { return steps_.size(); }

  void clear() {
    steps_.clear();
    outputs_.clear();
  }

 private:
  std::vector<std::function<void()>> steps_;
  std::unordered_set<const void*> outputs_;
  bool recording_ = true;
};

int shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace dirlearn
