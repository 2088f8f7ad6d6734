#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stan::num {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Set once an operation on a tape has produced this node.
  bool recorded = false;
};
}  // namespace detail

// Dense row-major array of doubles. Copies share storage (handle semantics);
// use clone() for an independent copy. Values are only mutated through
// mutable_values(), which is reserved for leaves (parameter initialization
// and optimizer updates).
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> values() const { return node_->data; }
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t row, std::size_t col) const;
  double operator[](std::size_t flat) const { return node_->data[flat]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return !node_->recorded; }

  Tensor clone() const;
  Tensor detach() const;

  const detail::TensorNode* node() const { return node_.get(); }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape;
  std::shared_ptr<detail::TensorNode> node_;
};

}  // namespace stan::num
