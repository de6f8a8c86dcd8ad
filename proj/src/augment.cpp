#include "stgc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "stgc/ops.hpp"

namespace stgc {

const char* aug_kind_name(AugKind k) {
  switch (k) {
    case AugKind::NodeDrop: return "node_drop";
    case AugKind::EdgePerturb: return "edge_perturb";
    case AugKind::NodeMask: return "node_mask";
    case AugKind::Subgraph: return "subgraph";
  }
  return "?";
}

std::optional<AugKind> parse_aug_kind(const std::string& s) {
  for (int k = 0; k < kAugKindCount; ++k)
    if (s == aug_kind_name(static_cast<AugKind>(k))) return static_cast<AugKind>(k);
  return std::nullopt;
}

int AugmentationConfig::enabled_count() const {
  int n = 0;
  for (bool e : enabled) n += e ? 1 : 0;
  return n;
}

void AugmentationConfig::validate() const {
  for (int k = 0; k < kAugKindCount; ++k) {
    double r = ratio[static_cast<std::size_t>(k)];
    if (r < 0.0 || r > 1.0)
      throw std::invalid_argument(std::string("aug.") + aug_kind_name(static_cast<AugKind>(k)) +
                                  ": ratio must be in [0, 1], got " + std::to_string(r));
  }
}

namespace {

/// Graph induced on the kept modality nodes (given in ascending order); keeps
/// z, its embedding, and the factor edges of every kept node.
TurnGraph induced_subgraph(const TurnGraph& g, const std::vector<int>& kept) {
  std::vector<int> remap(g.nodes.size(), -2);
  TurnGraph out;
  out.turn_index = g.turn_index;
  out.factor = g.factor;
  out.nodes.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    remap[static_cast<std::size_t>(kept[i])] = static_cast<int>(i);
    out.nodes.push_back(g.nodes[static_cast<std::size_t>(kept[i])]);
  }
  for (const GraphEdge& e : g.edges) {
    int s = e.src == kFactorNode ? kFactorNode : remap[static_cast<std::size_t>(e.src)];
    int d = e.dst == kFactorNode ? kFactorNode : remap[static_cast<std::size_t>(e.dst)];
    if (s == -2 || d == -2) continue;
    out.edges.push_back({s, d, e.type});
  }
  return out;
}

std::vector<int> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

TurnGraph node_drop(const TurnGraph& g, double ratio, Rng& rng) {
  int n = static_cast<int>(g.nodes.size());
  if (n == 0) throw std::invalid_argument("node_drop: graph has no modality nodes");
  int k = static_cast<int>(std::floor(ratio * n));
  if (k >= n) k = n - 1;  // always retain at least one modality node
  if (k <= 0) return g;
  std::vector<int> idx = shuffled_indices(static_cast<std::size_t>(n), rng);
  std::vector<int> kept(idx.begin() + k, idx.end());
  std::sort(kept.begin(), kept.end());
  return induced_subgraph(g, kept);
}

TurnGraph edge_perturb(const TurnGraph& g, double ratio, Rng& rng) {
  if (g.nodes.empty()) throw std::invalid_argument("edge_perturb: graph has no modality nodes");
  std::vector<std::size_t> modality_edges;
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    if (g.edges[i].src != kFactorNode && g.edges[i].dst != kFactorNode) modality_edges.push_back(i);
  int k = static_cast<int>(std::floor(ratio * static_cast<double>(modality_edges.size())));
  if (k <= 0) return g;
  std::shuffle(modality_edges.begin(), modality_edges.end(), rng);
  std::vector<bool> removed(g.edges.size(), false);
  for (int i = 0; i < k; ++i) removed[modality_edges[static_cast<std::size_t>(i)]] = true;
  TurnGraph out;
  out.turn_index = g.turn_index;
  out.nodes = g.nodes;
  out.factor = g.factor;
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    if (!removed[i]) out.edges.push_back(g.edges[i]);
  return out;
}

TurnGraph node_mask(const TurnGraph& g, double ratio, Rng& rng) {
  int n = static_cast<int>(g.nodes.size());
  if (n == 0) throw std::invalid_argument("node_mask: graph has no modality nodes");
  int k = static_cast<int>(std::floor(ratio * n));
  if (k <= 0) return g;
  std::vector<int> idx = shuffled_indices(static_cast<std::size_t>(n), rng);
  TurnGraph out = g;
  for (int i = 0; i < k; ++i) {
    GraphNode& node = out.nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    Tape& tape = *node.embed.tape;
    node.embed = constant(tape, Matrix::Zero(node.embed.rows(), node.embed.cols()));
  }
  return out;
}

TurnGraph subgraph_sample(const TurnGraph& g, double ratio, Rng& rng) {
  int n = static_cast<int>(g.nodes.size());
  if (n == 0) throw std::invalid_argument("subgraph_sample: graph has no modality nodes");
  int target = std::max(1, static_cast<int>(std::ceil(ratio * n)));
  if (target >= n) target = n;

  std::vector<std::vector<int>> out_nbrs(static_cast<std::size_t>(n));
  for (const GraphEdge& e : g.edges)
    if (e.src != kFactorNode && e.dst != kFactorNode)
      out_nbrs[static_cast<std::size_t>(e.src)].push_back(e.dst);

  std::uniform_int_distribution<int> start_dist(0, n - 1);
  int current = start_dist(rng);
  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  visited[static_cast<std::size_t>(current)] = true;
  int collected = 1;
  int budget = 10 * n;
  for (int step = 0; step < budget && collected < target; ++step) {
    const auto& nbrs = out_nbrs[static_cast<std::size_t>(current)];
    if (nbrs.empty()) {
      current = start_dist(rng);  // stranded; restart the walk somewhere else
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
      current = nbrs[pick(rng)];
    }
    if (!visited[static_cast<std::size_t>(current)]) {
      visited[static_cast<std::size_t>(current)] = true;
      ++collected;
    }
  }
  std::vector<int> kept;
  for (int i = 0; i < n; ++i)
    if (visited[static_cast<std::size_t>(i)]) kept.push_back(i);
  return induced_subgraph(g, kept);
}

TurnGraph apply_augmentation(AugKind k, const TurnGraph& g, double ratio, Rng& rng) {
  switch (k) {
    case AugKind::NodeDrop: return node_drop(g, ratio, rng);
    case AugKind::EdgePerturb: return edge_perturb(g, ratio, rng);
    case AugKind::NodeMask: return node_mask(g, ratio, rng);
    case AugKind::Subgraph: return subgraph_sample(g, ratio, rng);
  }
  throw std::logic_error("apply_augmentation: bad kind");
}

AugmentedPair make_views(const TurnGraph& g, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<AugKind> pool;
  for (int k = 0; k < kAugKindCount; ++k)
    if (cfg.enabled[static_cast<std::size_t>(k)]) pool.push_back(static_cast<AugKind>(k));
  if (pool.empty()) throw std::invalid_argument("make_views: no augmentation enabled");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  AugmentedPair pair;
  pair.turn_index = g.turn_index;
  AugKind k1 = pool[pick(rng)];
  pair.view1 = apply_augmentation(k1, g, cfg.ratio_of(k1), rng);
  AugKind k2 = pool[pick(rng)];
  pair.view2 = apply_augmentation(k2, g, cfg.ratio_of(k2), rng);
  return pair;
}

}  // namespace stgc
