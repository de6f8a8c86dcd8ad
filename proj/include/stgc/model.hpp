#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stgc/graph.hpp"
#include "stgc/init.hpp"
#include "stgc/ops.hpp"

namespace stgc {

struct ModelDims {
  int d = 80;  // shared node dimension
  int d_text = 10;
  int d_vision = 12;
  int d_acoustic = 8;
  int heads = 4;
  int layers = 2;

  int head_dim() const { return d / heads; }
  int feature_dim(Modality m) const;
};

/// Attention parameters of one layer, per (edge type, head): the attention
/// vector scores concatenated head-projected endpoint embeddings, and the
/// value projection maps a d-vector to a head_dim-vector for messages.
struct AttentionLayerParams {
  struct EdgeHead {
    Parameter att;   // [1 x 2*head_dim]
    Parameter proj;  // [head_dim x d]
  };
  std::array<std::vector<EdgeHead>, kNodeKindCount * kNodeKindCount> per_type;

  bool has(EdgeType t) const { return !per_type[t.id].empty(); }
  const EdgeHead& at(EdgeType t, int head) const;
  EdgeHead& at(EdgeType t, int head);
};

enum class FactorMode { Factorized, VideoLevel, MeanReadout };
const char* factor_mode_name(FactorMode m);
std::optional<FactorMode> parse_factor_mode(const std::string& s);

/// All trainable state of the contrastive encoder: modality input projections
/// to the shared dimension, the learned factorization-node seed shared across
/// turns, and the per-layer attention parameters.
struct ModelParams {
  ModelDims dims;
  std::array<Parameter, kModalityCount> input_proj;  // [d x d_m]
  Parameter factor_seed;                             // [d x 1]
  std::vector<AttentionLayerParams> layers;

  static ModelParams init(const ModelDims& dims, Rng& rng);
  std::vector<std::pair<std::string, Parameter*>> named_params();
};

/// One graph per speaking turn; every modality row becomes a node projected to
/// the shared dimension, modality nodes are pairwise connected in both
/// directions, and z links to every node. `trainable` controls whether model
/// parameters enter the tape as leaves (gradients flow) or constants (frozen).
std::vector<TurnGraph> build_turn_graphs(Tape& tape, const VideoRecord& video, ModelParams& params,
                                         bool trainable = true);

/// Single graph over all nodes of the video with one factorization node; turn
/// boundaries are ignored for connectivity but each node remembers its turn.
TurnGraph build_video_graph(Tape& tape, const VideoRecord& video, ModelParams& params,
                            bool trainable = true);

/// Arithmetic mean of the modality-node embeddings (excludes z).
Value mean_factor_readout(const TurnGraph& g);

/// LeakyReLU(att . [proj(src) || proj(dst)]) for one head of one edge type.
Value raw_score(Tape& tape, AttentionLayerParams& layer, EdgeType type, int head, Value src,
                Value dst, bool trainable = true);

/// Softmax over raw scores of a neighborhood; throws if empty.
Value normalize_scores(std::span<const Value> betas);

/// Observed normalized attention scores, for the quantitative analyses.
struct AttentionProbe {
  struct Entry {
    int layer = 0;
    int head = 0;
    int anchor = 0;  // flat node id within the encoded graph union
    int neighbor = 0;
    int anchor_turn = 0;
    int neighbor_turn = 0;
    bool anchor_is_factor = false;
    bool neighbor_is_factor = false;
    double alpha = 0.0;
  };
  std::vector<Entry> entries;
};

struct EncodeOptions {
  FactorMode mode = FactorMode::Factorized;
  bool z_cross_links = true;      // complete digraph over factor nodes of different turns
  bool trainable = true;          // false: parameters enter the tape as constants
  double attention_dropout = 0.0; // applied to normalized scores when rng is set
  Rng* rng = nullptr;
  AttentionProbe* probe = nullptr;
};

/// Runs `params.dims.layers` synchronous attention layers over the union of
/// the given graphs (plus factor-factor links across turns when enabled),
/// updating embeddings in place. Returns one vector per turn: the factor node
/// (Factorized), the single factor node (VideoLevel, exactly one graph), or
/// the mean readout per turn (MeanReadout, in which case factor nodes neither
/// attend nor update).
std::vector<Value> encode_graphs(Tape& tape, std::vector<TurnGraph>& graphs, ModelParams& params,
                                 const EncodeOptions& opts);

/// One synchronous attention layer over a standalone graph.
TurnGraph update_nodes(Tape& tape, const TurnGraph& g, ModelParams& params, int layer,
                       const EncodeOptions& opts = {});

/// build + encode for the given mode.
std::vector<Value> encode_video(Tape& tape, const VideoRecord& video, ModelParams& params,
                                const EncodeOptions& opts);

/// Inverted-dropout mask multiply; identity when rate == 0.
Value dropout(Value x, double rate, Rng& rng);

}  // namespace stgc
