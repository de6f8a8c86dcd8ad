#pragma once

#include <array>
#include <optional>
#include <string>

#include "stgc/graph.hpp"
#include "stgc/init.hpp"

namespace stgc {

enum class AugKind : int { NodeDrop = 0, EdgePerturb = 1, NodeMask = 2, Subgraph = 3 };
constexpr int kAugKindCount = 4;
const char* aug_kind_name(AugKind k);
std::optional<AugKind> parse_aug_kind(const std::string& s);

struct AugmentationConfig {
  std::array<double, kAugKindCount> ratio = {0.5, 0.5, 0.5, 0.5};
  std::array<bool, kAugKindCount> enabled = {true, true, true, true};

  double ratio_of(AugKind k) const { return ratio[static_cast<std::size_t>(k)]; }
  bool is_enabled(AugKind k) const { return enabled[static_cast<std::size_t>(k)]; }
  int enabled_count() const;
  void validate() const;  // ratios in [0,1]
};

// Stochastic graph augmentations. None of them touches the factorization node,
// its embedding, or the factor edges of surviving modality nodes; selections
// are uniform. Counts use floor(ratio * N); node_drop keeps at least one
// modality node.

TurnGraph node_drop(const TurnGraph& g, double ratio, Rng& rng);

/// Drops floor(ratio * E) of the modality-modality directed edges. Within-turn
/// graphs are complete, so edge addition would be a no-op and is not performed.
TurnGraph edge_perturb(const TurnGraph& g, double ratio, Rng& rng);

TurnGraph node_mask(const TurnGraph& g, double ratio, Rng& rng);

/// Random walk over modality nodes from a uniform start, collecting distinct
/// nodes until max(1, ceil(ratio * n)) are found or 10n steps elapse; returns
/// the induced subgraph plus z.
TurnGraph subgraph_sample(const TurnGraph& g, double ratio, Rng& rng);

TurnGraph apply_augmentation(AugKind k, const TurnGraph& g, double ratio, Rng& rng);

/// Two views of one turn graph, produced by independently sampling an enabled
/// augmentation (uniformly) per view and applying it with fresh randomness.
struct AugmentedPair {
  int turn_index = 0;
  TurnGraph view1;
  TurnGraph view2;
};

AugmentedPair make_views(const TurnGraph& g, const AugmentationConfig& cfg, Rng& rng);

}  // namespace stgc
