#pragma once

#include <cstdint>
#include <vector>

#include "stgc/tape.hpp"

namespace stgc {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay. Moment buffers are created lazily per
/// registered parameter and are exposed for checkpointing.
class AdamW {
 public:
  struct Slot {
    Matrix m;
    Matrix v;
  };

  AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

  /// One update. Requires that backward() ran since the last step; zeroes all
  /// gradients afterwards.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& params() const { return params_; }
  std::vector<Slot>& slots() { return slots_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Slot> slots_;
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
};

}  // namespace stgc
