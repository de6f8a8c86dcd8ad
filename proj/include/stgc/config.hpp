#pragma once

#include <cstdint>
#include <string>

#include "stgc/augment.hpp"
#include "stgc/model.hpp"
#include "stgc/qa.hpp"

namespace stgc {

/// Every hyperparameter and mode flag of the pipeline, loadable from a flat
/// key=value file. Unknown keys and out-of-domain values are rejected with an
/// error naming the key before any compute starts.
struct TrainConfig {
  std::uint64_t seed = 42;
  int hidden_dim = 80;
  int heads = 4;
  int layers = 2;
  double lr = 1e-3;
  double weight_decay = 0.01;
  int batch_size = 15;
  int max_epochs = 25;
  int max_seq_len = 25;
  FactorMode factor_mode = FactorMode::Factorized;
  bool z_cross_links = true;
  double attention_dropout = 0.0;
  double tau = 0.5;
  bool include_positive_in_denominator = false;
  bool symmetric_anchors = true;
  AugmentationConfig aug;
  FinetuneMode finetune_mode = FinetuneMode::Frozen;
  GraphScope graph_scope = GraphScope::TurnLevel;
  double probe_dropout = 0.5;
  int probe_max_epochs = 30;
  int probe_patience = 5;

  /// Set one key; throws on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Domain validation; throws naming the offending key.
  void validate() const;
  /// Round-trippable key=value text (one key per line).
  std::string to_kv() const;
  static TrainConfig from_kv(const std::string& text);
};

/// Parse a key=value file ('#' comments, blank lines allowed) on top of
/// defaults, then validate.
TrainConfig load_config_file(const std::string& path);

/// Apply key=value lines from a string buffer onto an existing config.
void apply_kv(TrainConfig& cfg, const std::string& text);

}  // namespace stgc
