#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace stgc {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Trainable tensor with persistent gradient storage. Parameters outlive the
/// tapes that reference them; gradients accumulate across backward passes
/// until an optimizer step (or zero_grad) resets them.
struct Parameter {
  Matrix value;
  Matrix grad;
  bool has_grad = false;  // set by backward(), cleared by the optimizer

  Parameter() = default;
  explicit Parameter(Matrix v)
      : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() {
    grad.setZero();
    has_grad = false;
  }
};

/// Handle to a node recorded on a Tape. Cheap to copy; invalidated when the
/// tape is cleared (which backward() does).
struct Value {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& val() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
  double scalar() const;
};

/// Record of one forward computation. Operations are appended in execution
/// order, so every node's inputs precede it and a single reverse sweep
/// propagates gradients to all parameters reachable from the loss.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  struct Node {
    Matrix value;
    Matrix grad;  // sized lazily during backward
    bool requires_grad = false;
    BackwardFn backward;
  };

  Value record(Matrix value, bool requires_grad, BackwardFn backward = {});

  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulate upstream gradient into node `id`; no-op for nodes that do not
  /// require grad.
  void accumulate(std::int32_t id, const Matrix& g);

  /// Parameters that appeared as leaves on this tape.
  void register_param(Parameter* p) { params_.push_back(p); }
  const std::vector<Parameter*>& params() const { return params_; }

  /// Distance to the nearest non-differentiable kink (|pre-activation| for
  /// relu-family ops) seen since the last reset. Gradient-check harnesses use
  /// this to resample points that sit too close to a kink.
  double kink_distance() const { return kink_distance_; }
  void note_kink(double d) {
    if (d < kink_distance_) kink_distance_ = d;
  }
  void reset_kink_distance() { kink_distance_ = std::numeric_limits<double>::infinity(); }

  void clear();

 private:
  std::vector<Node> nodes_;
  std::vector<Parameter*> params_;
  double kink_distance_ = std::numeric_limits<double>::infinity();
};

inline const Matrix& Value::val() const { return tape->node(id).value; }
inline double Value::scalar() const { return val()(0, 0); }

/// Reverse sweep from a scalar loss. Populates Parameter::grad for every
/// parameter recorded on the tape, marks them has_grad, then clears the tape
/// (invalidating all Values that point into it).
void backward(Value loss);

}  // namespace stgc
