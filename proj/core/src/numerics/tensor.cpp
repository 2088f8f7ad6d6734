#include "stan/numerics/tensor.hpp"

#include <sstream>
#include <utility>

#include "stan/errors.hpp"

namespace stan::num {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_extents(const Shape& shape) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
}
}  // namespace

Tensor::Tensor() : Tensor(Shape{}) {}

Tensor::Tensor(Shape shape) : node_(std::make_shared<detail::TensorNode>()) {
  check_extents(shape);
  node_->data.assign(element_count(shape), 0.0);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<detail::TensorNode>()) {
  check_extents(shape);
  if (element_count(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " + std::to_string(element_count(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }
Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }
Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> v(element_count(shape), value);
  return Tensor(std::move(shape), std::move(v));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  return node_->shape[axis];
}

std::span<double> Tensor::mutable_values() {
  if (node_->recorded) throw ContractError("only leaf tensors may be mutated in place");
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) needs a matrix, got " + shape_string(shape()));
  return node_->data[row * node_->shape[1] + col];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  if (node_->recorded) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = flag;
  return *this;
}

Tensor Tensor::clone() const {
  Tensor out(node_->shape, node_->data);
  out.node_->requires_grad = node_->requires_grad && !node_->recorded;
  return out;
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data); }

}  // namespace stan::num
