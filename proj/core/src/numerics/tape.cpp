#include "stan/numerics/tape.hpp"

#include <utility>

#include "stan/errors.hpp"

namespace stan::num {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

std::vector<double> GradientSet::of(const Tensor& leaf) const {
  auto it = grads_.find(leaf.node());
  if (it == grads_.end()) return std::vector<double>(leaf.size(), 0.0);
  return it->second;
}

bool GradientSet::contains(const Tensor& leaf) const { return grads_.count(leaf.node()) != 0; }

void Tape::record(Tensor& output, BackwardFn backward) {
  output.node_->requires_grad = true;
  output.node_->recorded = true;
  entries_.push_back(Entry{output, std::move(backward)});
}

std::span<double> Tape::grad_buffer(const Tensor& t) {
  auto& buf = grads_[t.node()];
  if (buf.empty()) buf.assign(t.size(), 0.0);
  return buf;
}

GradientSet Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  grads_.clear();
  GradientSet result;
  if (!loss.requires_grad()) return result;
  grads_[loss.node()] = {1.0};

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    auto found = grads_.find(it->output.node());
    if (found == grads_.end()) continue;
    // The backward rule may insert into grads_, so work on a moved-out copy.
    std::vector<double> grad_out = std::move(found->second);
    grads_.erase(found);
    it->backward(grad_out, *this);
  }

  for (auto& [node, grad] : grads_) {
    if (!node->recorded && node->requires_grad) result.grads_.emplace(node, std::move(grad));
  }
  grads_.clear();
  return result;
}

void Tape::clear() {
  entries_.clear();
  grads_.clear();
}

}  // namespace stan::num
