#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stgc/init.hpp"
#include "stgc/optim.hpp"
#include "stgc/tape.hpp"

namespace stgc {

/// Everything needed to continue a run bit-identically: parameter tensors,
/// optimizer moments, the config snapshot, the epoch counter, and the training
/// rng stream state. Stored as a little-endian binary file so doubles round-
/// trip exactly.
struct Checkpoint {
  std::string phase;      // "pretrain" or "finetune"
  std::string config_kv;  // TrainConfig snapshot
  std::int64_t epoch = 0;
  std::string rng_state;
  std::int32_t d_text = 0, d_vision = 0, d_acoustic = 0, d_q = 0;  // data dims
  std::vector<std::pair<std::string, Matrix>> tensors;
  bool has_optim = false;
  std::int64_t optim_step = 0;
  std::vector<std::pair<std::string, Matrix>> optim_m;
  std::vector<std::pair<std::string, Matrix>> optim_v;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

using NamedParams = std::vector<std::pair<std::string, Parameter*>>;

/// Copy parameter values into the checkpoint tensor table (appends).
void collect_tensors(Checkpoint& ckpt, const NamedParams& params);
/// Restore by name; throws if a name is missing or shapes differ. Extra
/// checkpoint tensors (e.g. another component's) are ignored.
void restore_tensors(const Checkpoint& ckpt, const NamedParams& params);

void collect_optimizer(Checkpoint& ckpt, AdamW& opt, const NamedParams& params);
void restore_optimizer(const Checkpoint& ckpt, AdamW& opt, const NamedParams& params);

/// FNV-1a over the raw value bytes in listing order; detects any drift.
std::uint64_t params_hash(const NamedParams& params);

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& s);

}  // namespace stgc
