#include "stgc/tape.hpp"

#include <stdexcept>

namespace stgc {

Value Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::accumulate(std::int32_t id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::clear() {
  nodes_.clear();
  params_.clear();
}

void backward(Value loss) {
  if (!loss.valid()) throw std::invalid_argument("backward: invalid loss handle");
  Tape& tape = *loss.tape;
  Tape::Node& root = tape.node(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got [" +
                                std::to_string(root.value.rows()) + " x " +
                                std::to_string(root.value.cols()) + "]");
  }
  if (root.requires_grad) {
    root.grad = Matrix::Ones(1, 1);
    for (std::int32_t id = loss.id; id >= 0; --id) {
      Tape::Node& n = tape.node(id);
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(tape, n.grad);
    }
  }
  for (Parameter* p : tape.params()) p->has_grad = true;
  tape.clear();
}

}  // namespace stgc
