#include "dirlearn/tensor.hpp"

#include <sstream>

namespace dirlearn {

int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("shape extent must be positive, got " + std::to_string(d));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape) {
  return full(std::move(shape), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  int n = shape_numel(shape);
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = Array::Constant(n, value);
  t.impl_->grad = Array::Zero(n);
  return t;
}

Tensor Tensor::from_array(std::vector<int> shape, Array values) {
  int n = shape_numel(shape);
  if (n != values.size()) {
    throw ShapeError("from_array: shape " + shape_str(shape) + " holds " +
                     std::to_string(n) + " elements but buffer has " +
                     std::to_string(values.size()));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  t.impl_->grad = Array::Zero(n);
  return t;
}

Tensor Tensor::param(std::vector<int> shape, Array values) {
  Tensor t = from_array(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw ContractError("scalar_value: tensor has " + std::to_string(numel()) +
                        " elements, expected 1");
  }
  return impl_->values[0];
}

MatrixMap Tensor::matrix(int rows, int cols) {
  if (rows * cols != numel()) {
    throw ShapeError("matrix view " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " incompatible with " +
                     shape_str(shape()));
  }
  return MatrixMap(impl_->values.data(), rows, cols);
}

ConstMatrixMap Tensor::matrix(int rows, int cols) const {
  if (rows * cols != numel()) {
    throw ShapeError("matrix view " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " incompatible with " +
                     shape_str(shape()));
  }
  return ConstMatrixMap(impl_->values.data(), rows, cols);
}

MatrixMap Tensor::matrix2d() {
  int rows = dim(0);
  return matrix(rows, numel() / rows);
}

ConstMatrixMap Tensor::matrix2d() const {
  int rows = dim(0);
  return matrix(rows, numel() / rows);
}

void Tape::record(Tensor& out, std::function<void()> backward_step) {
  if (!recording_) return;
  out.mark_on_graph();
  outputs_.insert(out.id());
  steps_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss.shape()));
  }
  if (outputs_.find(loss.id()) == outputs_.end()) {
    throw ContractError("backward: loss was not produced by this tape");
  }
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    (*it)();
  }
}

}  // namespace dirlearn
