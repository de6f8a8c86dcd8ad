#include "stgc/model.hpp"

#include <stdexcept>
#include <unordered_map>

namespace stgc {

int ModelDims::feature_dim(Modality m) const {
  switch (m) {
    case Modality::Text: return d_text;
    case Modality::Vision: return d_vision;
    case Modality::Acoustic: return d_acoustic;
  }
  throw std::logic_error("feature_dim: bad modality");
}

const AttentionLayerParams::EdgeHead& AttentionLayerParams::at(EdgeType t, int head) const {
  const auto& v = per_type[t.id];
  if (v.empty())
    throw std::invalid_argument("attention: unknown edge type " + edge_type_name(t));
  return v.at(static_cast<std::size_t>(head));
}

AttentionLayerParams::EdgeHead& AttentionLayerParams::at(EdgeType t, int head) {
  auto& v = per_type[t.id];
  if (v.empty())
    throw std::invalid_argument("attention: unknown edge type " + edge_type_name(t));
  return v.at(static_cast<std::size_t>(head));
}

const char* factor_mode_name(FactorMode m) {
  switch (m) {
    case FactorMode::Factorized: return "factorized";
    case FactorMode::VideoLevel: return "video_level";
    case FactorMode::MeanReadout: return "mean_readout";
  }
  return "?";
}

std::optional<FactorMode> parse_factor_mode(const std::string& s) {
  if (s == "factorized") return FactorMode::Factorized;
  if (s == "video_level") return FactorMode::VideoLevel;
  if (s == "mean_readout") return FactorMode::MeanReadout;
  return std::nullopt;
}

ModelParams ModelParams::init(const ModelDims& dims, Rng& rng) {
  if (dims.d <= 0 || dims.heads <= 0 || dims.layers <= 0)
    throw std::invalid_argument("model: dimensions must be positive");
  if (dims.d % dims.heads != 0)
    throw std::invalid_argument("model: hidden dim " + std::to_string(dims.d) +
                                " not divisible by head count " + std::to_string(dims.heads));
  ModelParams p;
  p.dims = dims;
  for (int m = 0; m < kModalityCount; ++m)
    p.input_proj[static_cast<std::size_t>(m)] =
        glorot_param(dims.d, dims.feature_dim(static_cast<Modality>(m)), rng);
  p.factor_seed = glorot_param(dims.d, 1, rng);
  int dh = dims.head_dim();
  p.layers.resize(static_cast<std::size_t>(dims.layers));
  for (auto& layer : p.layers) {
    for (int tid : base_edge_type_ids()) {
      auto& heads = layer.per_type[static_cast<std::size_t>(tid)];
      heads.reserve(static_cast<std::size_t>(dims.heads));
      for (int h = 0; h < dims.heads; ++h) {
        AttentionLayerParams::EdgeHead eh;
        eh.att = glorot_param(1, 2 * dh, rng);
        eh.proj = glorot_param(dh, dims.d, rng);
        heads.push_back(std::move(eh));
      }
    }
  }
  return p;
}

std::vector<std::pair<std::string, Parameter*>> ModelParams::named_params() {
  std::vector<std::pair<std::string, Parameter*>> out;
  for (int m = 0; m < kModalityCount; ++m)
    out.emplace_back(std::string("enc.proj.") + modality_name(static_cast<Modality>(m)),
                     &input_proj[static_cast<std::size_t>(m)]);
  out.emplace_back("enc.factor_seed", &factor_seed);
  for (std::size_t l = 0; l < layers.size(); ++l)
    for (int tid : base_edge_type_ids()) {
      auto& heads = layers[l].per_type[static_cast<std::size_t>(tid)];
      for (std::size_t h = 0; h < heads.size(); ++h) {
        std::string base = "enc.l" + std::to_string(l) + "." +
                           edge_type_name(EdgeType{static_cast<std::uint8_t>(tid)}) + ".h" +
                           std::to_string(h);
        out.emplace_back(base + ".att", &heads[h].att);
        out.emplace_back(base + ".proj", &heads[h].proj);
      }
    }
  return out;
}

namespace {

Value as_value(Tape& tape, Parameter& p, bool trainable) {
  return trainable ? leaf(tape, p) : constant(tape, p.value);
}

void complete_modality_edges(TurnGraph& g) {
  int n = static_cast<int>(g.nodes.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      g.edges.push_back({i, j, edge_type(g.nodes[static_cast<std::size_t>(i)].kind,
                                         g.nodes[static_cast<std::size_t>(j)].kind)});
    }
  for (int i = 0; i < n; ++i) {
    NodeKind k = g.nodes[static_cast<std::size_t>(i)].kind;
    g.edges.push_back({i, kFactorNode, edge_type(k, NodeKind::Factor)});
    g.edges.push_back({kFactorNode, i, edge_type(NodeKind::Factor, k)});
  }
}

struct GraphBuilder {
  Tape& tape;
  ModelParams& params;
  bool trainable;
  std::array<std::optional<Value>, kModalityCount> proj_values;
  std::optional<Value> factor_value;

  Value projection(Modality m) {
    auto& slot = proj_values[static_cast<std::size_t>(m)];
    if (!slot) slot = as_value(tape, params.input_proj[static_cast<std::size_t>(m)], trainable);
    return *slot;
  }

  Value factor() {
    if (!factor_value) factor_value = as_value(tape, params.factor_seed, trainable);
    return *factor_value;
  }

  void add_turn_nodes(TurnGraph& g, const Turn& turn, int source_turn) {
    for (int m = 0; m < kModalityCount; ++m) {
      const Matrix& feats = turn.features(static_cast<Modality>(m));
      for (Eigen::Index r = 0; r < feats.rows(); ++r) {
        Value x = constant(tape, feats.row(r).transpose());
        Value embed = matmul(projection(static_cast<Modality>(m)), x);
        g.nodes.push_back({kind_of(static_cast<Modality>(m)), source_turn, embed});
      }
    }
  }
};

}  // namespace

std::vector<TurnGraph> build_turn_graphs(Tape& tape, const VideoRecord& video, ModelParams& params,
                                         bool trainable) {
  int dims[3] = {params.dims.d_text, params.dims.d_vision, params.dims.d_acoustic};
  validate_record(video, dims);
  GraphBuilder builder{tape, params, trainable, {}, {}};
  std::vector<TurnGraph> graphs;
  graphs.reserve(video.turns.size());
  for (std::size_t ti = 0; ti < video.turns.size(); ++ti) {
    TurnGraph g;
    g.turn_index = static_cast<int>(ti);
    builder.add_turn_nodes(g, video.turns[ti], static_cast<int>(ti));
    complete_modality_edges(g);
    g.factor = builder.factor();
    graphs.push_back(std::move(g));
  }
  return graphs;
}

TurnGraph build_video_graph(Tape& tape, const VideoRecord& video, ModelParams& params,
                            bool trainable) {
  int dims[3] = {params.dims.d_text, params.dims.d_vision, params.dims.d_acoustic};
  validate_record(video, dims);
  GraphBuilder builder{tape, params, trainable, {}, {}};
  TurnGraph g;
  g.turn_index = 0;
  for (std::size_t ti = 0; ti < video.turns.size(); ++ti)
    builder.add_turn_nodes(g, video.turns[ti], static_cast<int>(ti));
  complete_modality_edges(g);
  g.factor = builder.factor();
  return g;
}

Value mean_factor_readout(const TurnGraph& g) {
  if (g.nodes.empty()) throw std::invalid_argument("mean_factor_readout: graph has no modality nodes");
  std::vector<Value> embeds;
  embeds.reserve(g.nodes.size());
  for (const GraphNode& n : g.nodes) embeds.push_back(n.embed);
  Value stacked = hcat(std::span<const Value>(embeds.data(), embeds.size()));
  Tape& tape = *embeds[0].tape;
  double inv = 1.0 / static_cast<double>(embeds.size());
  Value weights = constant(tape, Matrix::Constant(static_cast<Eigen::Index>(embeds.size()), 1, inv));
  return matmul(stacked, weights);
}

Value raw_score(Tape& tape, AttentionLayerParams& layer, EdgeType type, int head, Value src,
                Value dst, bool trainable) {
  AttentionLayerParams::EdgeHead& eh = layer.at(type, head);
  Value att = as_value(tape, eh.att, trainable);
  Value proj = as_value(tape, eh.proj, trainable);
  Value pre = matmul(att, vcat({matmul(proj, src), matmul(proj, dst)}));
  return leaky_relu(pre, 0.2);
}

Value normalize_scores(std::span<const Value> betas) {
  if (betas.empty()) throw std::invalid_argument("normalize_scores: empty neighborhood");
  return softmax(vcat(betas));
}

Value dropout(Value x, double rate, Rng& rng) {
  if (rate == 0.0) return x;
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  double keep = 1.0 - rate;
  std::bernoulli_distribution dist(keep);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(i, j) = dist(rng) ? 1.0 / keep : 0.0;
  return cwise_mul(x, constant(*x.tape, std::move(mask)));
}

namespace {

/// Shared attention engine over the union of a video's graphs.
class Engine {
 public:
  Engine(Tape& tape, std::vector<TurnGraph>& graphs, ModelParams& params, const EncodeOptions& opts)
      : tape_(tape), graphs_(graphs), params_(params), opts_(opts) {
    if (opts.mode == FactorMode::VideoLevel && graphs.size() != 1)
      throw std::invalid_argument("encode: video_level mode expects a single graph");
    build_flat();
  }

  void run_layer(int layer);
  std::vector<Value> outputs();

 private:
  struct FlatNode {
    Value embed;
    NodeKind kind;
    int turn = 0;
    bool is_factor = false;
    int graph = 0;
    int local = 0;
  };
  struct Neighbor {
    int flat;
    EdgeType type;
  };

  void build_flat();
  Value projected(int layer, int flat, EdgeType type, int head);
  Value att_vector(int layer, EdgeType type, int head);

  Tape& tape_;
  std::vector<TurnGraph>& graphs_;
  ModelParams& params_;
  const EncodeOptions& opts_;
  std::vector<FlatNode> flat_;
  std::vector<std::vector<Neighbor>> adj_;
  std::vector<int> factor_flat_;  // per graph
  std::unordered_map<long long, Value> proj_cache_;   // valid within one layer
  std::unordered_map<long long, Value> param_cache_;  // att/proj leaf values
};

void Engine::build_flat() {
  bool use_factor = opts_.mode != FactorMode::MeanReadout;
  std::vector<std::vector<int>> local_to_flat(graphs_.size());
  for (std::size_t gi = 0; gi < graphs_.size(); ++gi) {
    TurnGraph& g = graphs_[gi];
    local_to_flat[gi].resize(g.nodes.size());
    for (std::size_t ni = 0; ni < g.nodes.size(); ++ni) {
      local_to_flat[gi][ni] = static_cast<int>(flat_.size());
      flat_.push_back({g.nodes[ni].embed, g.nodes[ni].kind, g.nodes[ni].source_turn, false,
                       static_cast<int>(gi), static_cast<int>(ni)});
    }
  }
  factor_flat_.assign(graphs_.size(), -1);
  for (std::size_t gi = 0; gi < graphs_.size(); ++gi) {
    factor_flat_[gi] = static_cast<int>(flat_.size());
    flat_.push_back({graphs_[gi].factor, NodeKind::Factor, graphs_[gi].turn_index, true,
                     static_cast<int>(gi), kFactorNode});
  }
  adj_.resize(flat_.size());
  for (std::size_t gi = 0; gi < graphs_.size(); ++gi) {
    for (const GraphEdge& e : graphs_[gi].edges) {
      bool touches_factor = e.src == kFactorNode || e.dst == kFactorNode;
      if (touches_factor && !use_factor) continue;
      int s = e.src == kFactorNode ? factor_flat_[gi] : local_to_flat[gi][static_cast<std::size_t>(e.src)];
      int d = e.dst == kFactorNode ? factor_flat_[gi] : local_to_flat[gi][static_cast<std::size_t>(e.dst)];
      adj_[static_cast<std::size_t>(s)].push_back({d, e.type});
    }
  }
  if (use_factor && opts_.mode == FactorMode::Factorized && opts_.z_cross_links) {
    EdgeType ff = edge_type(NodeKind::Factor, NodeKind::Factor);
    for (std::size_t gi = 0; gi < graphs_.size(); ++gi)
      for (std::size_t gj = 0; gj < graphs_.size(); ++gj)
        if (gi != gj) adj_[static_cast<std::size_t>(factor_flat_[gi])].push_back({factor_flat_[gj], ff});
  }
}

Value Engine::att_vector(int layer, EdgeType type, int head) {
  long long key = ((static_cast<long long>(layer) * 64 + type.id) * 64 + head);
  auto it = param_cache_.find(key);
  if (it != param_cache_.end()) return it->second;
  Value v = as_value(tape_, params_.layers[static_cast<std::size_t>(layer)].at(type, head).att,
                     opts_.trainable);
  param_cache_.emplace(key, v);
  return v;
}

Value Engine::projected(int layer, int flat, EdgeType type, int head) {
  long long key = ((static_cast<long long>(flat) * 64 + type.id) * 64 + head);
  auto it = proj_cache_.find(key);
  if (it != proj_cache_.end()) return it->second;
  long long pkey = -1 - ((static_cast<long long>(layer) * 64 + type.id) * 64 + head);
  Value w;
  auto pit = param_cache_.find(pkey);
  if (pit != param_cache_.end()) {
    w = pit->second;
  } else {
    w = as_value(tape_, params_.layers[static_cast<std::size_t>(layer)].at(type, head).proj,
                 opts_.trainable);
    param_cache_.emplace(pkey, w);
  }
  Value v = matmul(w, flat_[static_cast<std::size_t>(flat)].embed);
  proj_cache_.emplace(key, v);
  return v;
}

void Engine::run_layer(int layer) {
  proj_cache_.clear();
  std::vector<Value> next(flat_.size());
  for (std::size_t i = 0; i < flat_.size(); ++i) {
    const FlatNode& node = flat_[i];
    if (node.is_factor && opts_.mode == FactorMode::MeanReadout) {
      next[i] = node.embed;
      continue;
    }
    const auto& nbrs = adj_[i];
    if (nbrs.empty()) {
      next[i] = node.embed;  // nothing to attend over; keep the embedding
      continue;
    }
    std::vector<Value> head_outs;
    head_outs.reserve(static_cast<std::size_t>(params_.dims.heads));
    for (int h = 0; h < params_.dims.heads; ++h) {
      std::vector<Value> betas;
      std::vector<Value> msgs;
      betas.reserve(nbrs.size());
      msgs.reserve(nbrs.size());
      for (const Neighbor& nb : nbrs) {
        Value ps = projected(layer, static_cast<int>(i), nb.type, h);
        Value pd = projected(layer, nb.flat, nb.type, h);
        Value pre = matmul(att_vector(layer, nb.type, h), vcat({ps, pd}));
        betas.push_back(leaky_relu(pre, 0.2));
        msgs.push_back(pd);
      }
      Value alphas = normalize_scores(std::span<const Value>(betas.data(), betas.size()));
      if (opts_.attention_dropout > 0.0 && opts_.rng != nullptr)
        alphas = dropout(alphas, opts_.attention_dropout, *opts_.rng);
      if (opts_.probe != nullptr) {
        const Matrix& a = alphas.val();
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
          const FlatNode& nbn = flat_[static_cast<std::size_t>(nbrs[k].flat)];
          opts_.probe->entries.push_back({layer, h, static_cast<int>(i), nbrs[k].flat, node.turn,
                                          nbn.turn, node.is_factor, nbn.is_factor,
                                          a(static_cast<Eigen::Index>(k), 0)});
        }
      }
      head_outs.push_back(matmul(hcat(std::span<const Value>(msgs.data(), msgs.size())), alphas));
    }
    next[i] = vcat(std::span<const Value>(head_outs.data(), head_outs.size()));
  }
  for (std::size_t i = 0; i < flat_.size(); ++i) {
    flat_[i].embed = next[i];
    TurnGraph& g = graphs_[static_cast<std::size_t>(flat_[i].graph)];
    if (flat_[i].is_factor) {
      g.factor = next[i];
    } else {
      g.nodes[static_cast<std::size_t>(flat_[i].local)].embed = next[i];
    }
  }
}

std::vector<Value> Engine::outputs() {
  std::vector<Value> out;
  if (opts_.mode == FactorMode::MeanReadout) {
    for (TurnGraph& g : graphs_) out.push_back(mean_factor_readout(g));
  } else {
    for (TurnGraph& g : graphs_) out.push_back(g.factor);
  }
  return out;
}

}  // namespace

std::vector<Value> encode_graphs(Tape& tape, std::vector<TurnGraph>& graphs, ModelParams& params,
                                 const EncodeOptions& opts) {
  if (graphs.empty()) throw std::invalid_argument("encode: no graphs");
  Engine engine(tape, graphs, params, opts);
  for (int l = 0; l < params.dims.layers; ++l) engine.run_layer(l);
  return engine.outputs();
}

TurnGraph update_nodes(Tape& tape, const TurnGraph& g, ModelParams& params, int layer,
                       const EncodeOptions& opts) {
  std::vector<TurnGraph> graphs{g};
  Engine engine(tape, graphs, params, opts);
  engine.run_layer(layer);
  return graphs[0];
}

std::vector<Value> encode_video(Tape& tape, const VideoRecord& video, ModelParams& params,
                                const EncodeOptions& opts) {
  std::vector<TurnGraph> graphs;
  if (opts.mode == FactorMode::VideoLevel) {
    graphs.push_back(build_video_graph(tape, video, params, opts.trainable));
  } else {
    graphs = build_turn_graphs(tape, video, params, opts.trainable);
  }
  return encode_graphs(tape, graphs, params, opts);
}

}  // namespace stgc
