#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "stan/numerics/tensor.hpp"

namespace stan::num {

// Gradients of a scalar loss with respect to the leaves reached by backward().
class GradientSet {
 public:
  // dLoss/dLeaf, or zeros when the leaf was not on the loss path.
  std::vector<double> of(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<const detail::TensorNode*, std::vector<double>> grads_;
};

// Define-by-run record of differentiable operations. Entries are appended as
// operations execute, so the list is already topologically ordered. A tape
// belongs to one thread; see TapeScope.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Tensor& output, BackwardFn backward);

  // Accumulation buffer for d(loss)/d(t), zero-initialized on first use.
  std::span<double> grad_buffer(const Tensor& t);

  GradientSet backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear();

 private:
  struct Entry {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::unordered_map<const detail::TensorNode*, std::vector<double>> grads_;
};

// The tape operations record onto in the current thread, or nullptr.
Tape* active_tape();

// Makes `tape` the active tape of the calling thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording in the calling thread (inference, frozen sub-networks).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace stan::num
