#include "stgc/qa.hpp"

#include <stdexcept>
#include <unordered_map>

namespace stgc {

const char* graph_scope_name(GraphScope s) {
  return s == GraphScope::TurnLevel ? "turn_level" : "video_level";
}

std::optional<GraphScope> parse_graph_scope(const std::string& s) {
  if (s == "turn_level") return GraphScope::TurnLevel;
  if (s == "video_level") return GraphScope::VideoLevel;
  return std::nullopt;
}

const char* finetune_mode_name(FinetuneMode m) {
  return m == FinetuneMode::Frozen ? "frozen" : "supervised_scratch";
}

std::optional<FinetuneMode> parse_finetune_mode(const std::string& s) {
  if (s == "frozen") return FinetuneMode::Frozen;
  if (s == "supervised_scratch") return FinetuneMode::SupervisedScratch;
  return std::nullopt;
}

LstmParams LstmParams::init(int hidden, int input_dim, Rng& rng) {
  LstmParams p;
  for (int g = 0; g < 4; ++g) {
    p.w_x[static_cast<std::size_t>(g)] = glorot_param(hidden, input_dim, rng);
    p.w_h[static_cast<std::size_t>(g)] = glorot_param(hidden, hidden, rng);
    p.b[static_cast<std::size_t>(g)] = zero_param(hidden, 1);
  }
  return p;
}

Value encode_sequence(Tape& tape, const Matrix& tokens, LstmParams& lstm, int max_len,
                      bool trainable) {
  if (tokens.rows() == 0) throw std::invalid_argument("encode_sequence: empty sequence");
  Eigen::Index steps = tokens.rows();
  if (max_len > 0 && steps > max_len) steps = max_len;
  int hidden = static_cast<int>(lstm.w_h[0].value.rows());

  auto as_value = [&](Parameter& p) { return trainable ? leaf(tape, p) : constant(tape, p.value); };
  Value wx[4], wh[4], b[4];
  for (int g = 0; g < 4; ++g) {
    wx[g] = as_value(lstm.w_x[static_cast<std::size_t>(g)]);
    wh[g] = as_value(lstm.w_h[static_cast<std::size_t>(g)]);
    b[g] = as_value(lstm.b[static_cast<std::size_t>(g)]);
  }

  Value h = constant(tape, Matrix::Zero(hidden, 1));
  Value c = constant(tape, Matrix::Zero(hidden, 1));
  for (Eigen::Index t = 0; t < steps; ++t) {
    Value x = constant(tape, tokens.row(t).transpose());
    Value i_gate = sigmoid(add(add(matmul(wx[0], x), matmul(wh[0], h)), b[0]));
    Value f_gate = sigmoid(add(add(matmul(wx[1], x), matmul(wh[1], h)), b[1]));
    Value g_gate = tanh(add(add(matmul(wx[2], x), matmul(wh[2], h)), b[2]));
    Value o_gate = sigmoid(add(add(matmul(wx[3], x), matmul(wh[3], h)), b[3]));
    c = add(cwise_mul(f_gate, c), cwise_mul(i_gate, g_gate));
    h = cwise_mul(o_gate, tanh(c));
  }
  return h;
}

QAHeadParams QAHeadParams::init(int d, int d_q, int heads, int conv_layers, Rng& rng) {
  if (d <= 0 || heads <= 0 || conv_layers <= 0 || d_q <= 0)
    throw std::invalid_argument("qa head: dimensions must be positive");
  if (d % heads != 0)
    throw std::invalid_argument("qa head: hidden dim not divisible by head count");
  QAHeadParams p;
  p.d = d;
  p.d_q = d_q;
  p.heads = heads;
  p.conv_layers = conv_layers;
  p.lstm_question = LstmParams::init(d, d_q, rng);
  p.lstm_answer = LstmParams::init(d, d_q, rng);
  int dh = d / heads;
  p.conv.resize(static_cast<std::size_t>(conv_layers));
  for (auto& layer : p.conv) {
    for (int tid : qa_edge_type_ids()) {
      auto& v = layer.per_type[static_cast<std::size_t>(tid)];
      v.reserve(static_cast<std::size_t>(heads));
      for (int h = 0; h < heads; ++h) {
        GatParams gp;
        gp.w_left = glorot_param(dh, d, rng);
        gp.w_right = glorot_param(dh, d, rng);
        gp.att = glorot_param(1, dh, rng);
        v.push_back(std::move(gp));
      }
    }
  }
  p.head_w1 = glorot_param(d, 2 * d, rng);
  p.head_b1 = zero_param(d, 1);
  p.head_w2 = glorot_param(1, d, rng);
  p.head_b2 = zero_param(1, 1);
  return p;
}

GatParams& QAHeadParams::gat(int layer, EdgeType type, int head) {
  auto& v = conv.at(static_cast<std::size_t>(layer)).per_type[type.id];
  if (v.empty()) throw std::invalid_argument("gatv2: unknown edge type " + edge_type_name(type));
  return v.at(static_cast<std::size_t>(head));
}

std::vector<std::pair<std::string, Parameter*>> QAHeadParams::named_params() {
  std::vector<std::pair<std::string, Parameter*>> out;
  const char* gate_names[4] = {"i", "f", "g", "o"};
  auto add_lstm = [&](const std::string& prefix, LstmParams& l) {
    for (int g = 0; g < 4; ++g) {
      out.emplace_back(prefix + ".wx." + gate_names[g], &l.w_x[static_cast<std::size_t>(g)]);
      out.emplace_back(prefix + ".wh." + gate_names[g], &l.w_h[static_cast<std::size_t>(g)]);
      out.emplace_back(prefix + ".b." + gate_names[g], &l.b[static_cast<std::size_t>(g)]);
    }
  };
  add_lstm("qa.lstm_q", lstm_question);
  add_lstm("qa.lstm_a", lstm_answer);
  for (std::size_t l = 0; l < conv.size(); ++l)
    for (int tid : qa_edge_type_ids()) {
      auto& v = conv[l].per_type[static_cast<std::size_t>(tid)];
      for (std::size_t h = 0; h < v.size(); ++h) {
        std::string base = "qa.conv.l" + std::to_string(l) + "." +
                           edge_type_name(EdgeType{static_cast<std::uint8_t>(tid)}) + ".h" +
                           std::to_string(h);
        out.emplace_back(base + ".wl", &v[h].w_left);
        out.emplace_back(base + ".wr", &v[h].w_right);
        out.emplace_back(base + ".att", &v[h].att);
      }
    }
  out.emplace_back("qa.head.w1", &head_w1);
  out.emplace_back("qa.head.b1", &head_b1);
  out.emplace_back("qa.head.w2", &head_w2);
  out.emplace_back("qa.head.b2", &head_b2);
  return out;
}

Value gatv2_score(Tape& tape, QAHeadParams& params, int layer, EdgeType type, int head, Value src,
                  Value dst, bool trainable) {
  GatParams& gp = params.gat(layer, type, head);
  auto as_value = [&](Parameter& p) { return trainable ? leaf(tape, p) : constant(tape, p.value); };
  Value pre = add(matmul(as_value(gp.w_left), src), matmul(as_value(gp.w_right), dst));
  return matmul(as_value(gp.att), leaky_relu(pre, 0.2));
}

namespace {

struct QANode {
  NodeKind kind;
  Value embed;
};

struct QAEdge {
  int src;
  int dst;
  EdgeType type;
};

/// GATv2 message passing over the heterogeneous QA graph; synchronous update
/// of every node, head outputs concatenated.
class QAConv {
 public:
  QAConv(Tape& tape, QAHeadParams& params, std::vector<QANode>& nodes,
         const std::vector<QAEdge>& edges, bool trainable)
      : tape_(tape), params_(params), nodes_(nodes), trainable_(trainable) {
    adj_.resize(nodes.size());
    for (const QAEdge& e : edges) adj_[static_cast<std::size_t>(e.src)].push_back({e.dst, e.type});
  }

  void run_layer(int layer) {
    left_cache_.clear();
    right_cache_.clear();
    std::vector<Value> next(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& nbrs = adj_[i];
      if (nbrs.empty()) {
        next[i] = nodes_[i].embed;
        continue;
      }
      std::vector<Value> head_outs;
      for (int h = 0; h < params_.heads; ++h) {
        std::vector<Value> scores;
        std::vector<Value> msgs;
        for (const auto& [nbr, type] : nbrs) {
          Value left = left_of(layer, static_cast<int>(i), type, h);
          Value right = right_of(layer, nbr, type, h);
          Value att = param_value(layer, type, h, 2);
          scores.push_back(matmul(att, leaky_relu(add(left, right), 0.2)));
          msgs.push_back(right);
        }
        Value alphas = normalize_scores(std::span<const Value>(scores.data(), scores.size()));
        head_outs.push_back(matmul(hcat(std::span<const Value>(msgs.data(), msgs.size())), alphas));
      }
      next[i] = vcat(std::span<const Value>(head_outs.data(), head_outs.size()));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].embed = next[i];
  }

 private:
  Value param_value(int layer, EdgeType type, int head, int which) {
    long long key = (((static_cast<long long>(layer) * 64 + type.id) * 64 + head) * 4 + which);
    auto it = param_cache_.find(key);
    if (it != param_cache_.end()) return it->second;
    GatParams& gp = params_.gat(layer, type, head);
    Parameter& p = which == 0 ? gp.w_left : which == 1 ? gp.w_right : gp.att;
    Value v = trainable_ ? leaf(tape_, p) : constant(tape_, p.value);
    param_cache_.emplace(key, v);
    return v;
  }

  Value left_of(int layer, int node, EdgeType type, int head) {
    long long key = ((static_cast<long long>(node) * 64 + type.id) * 64 + head);
    auto it = left_cache_.find(key);
    if (it != left_cache_.end()) return it->second;
    Value v = matmul(param_value(layer, type, head, 0), nodes_[static_cast<std::size_t>(node)].embed);
    left_cache_.emplace(key, v);
    return v;
  }

  Value right_of(int layer, int node, EdgeType type, int head) {
    long long key = ((static_cast<long long>(node) * 64 + type.id) * 64 + head);
    auto it = right_cache_.find(key);
    if (it != right_cache_.end()) return it->second;
    Value v = matmul(param_value(layer, type, head, 1), nodes_[static_cast<std::size_t>(node)].embed);
    right_cache_.emplace(key, v);
    return v;
  }

  Tape& tape_;
  QAHeadParams& params_;
  std::vector<QANode>& nodes_;
  bool trainable_;
  std::vector<std::vector<std::pair<int, EdgeType>>> adj_;
  std::unordered_map<long long, Value> param_cache_;
  std::unordered_map<long long, Value> left_cache_;
  std::unordered_map<long long, Value> right_cache_;
};

void connect_both(std::vector<QAEdge>& edges, int a, int b, NodeKind ka, NodeKind kb) {
  edges.push_back({a, b, edge_type(ka, kb)});
  edges.push_back({b, a, edge_type(kb, ka)});
}

}  // namespace

std::pair<Value, Value> qa_forward(Tape& tape, const VideoRecord& video, const QAItem& item,
                                   ModelParams& encoder, QAHeadParams& head,
                                   const QAForwardOptions& opts) {
  if (item.correct_position != 0 && item.correct_position != 1)
    throw std::invalid_argument("qa_forward: correct_position must be 0 or 1");

  // 1. run the (frozen or trainable) encoder
  EncodeOptions enc_opts;
  enc_opts.mode = opts.scope == GraphScope::TurnLevel ? FactorMode::Factorized : FactorMode::VideoLevel;
  enc_opts.z_cross_links = opts.z_cross_links;
  enc_opts.trainable = opts.trainable_encoder;
  std::vector<TurnGraph> graphs;
  if (opts.scope == GraphScope::VideoLevel) {
    graphs.push_back(build_video_graph(tape, video, encoder, opts.trainable_encoder));
  } else {
    graphs = build_turn_graphs(tape, video, encoder, opts.trainable_encoder);
  }
  encode_graphs(tape, graphs, encoder, enc_opts);

  // 2. assemble the QA graph over final embeddings
  std::vector<QANode> nodes;
  std::vector<QAEdge> edges;
  std::vector<std::vector<int>> node_ids(graphs.size());
  std::vector<int> factor_ids(graphs.size());
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    node_ids[gi].resize(graphs[gi].nodes.size());
    for (std::size_t ni = 0; ni < graphs[gi].nodes.size(); ++ni) {
      node_ids[gi][ni] = static_cast<int>(nodes.size());
      nodes.push_back({graphs[gi].nodes[ni].kind, graphs[gi].nodes[ni].embed});
    }
  }
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    factor_ids[gi] = static_cast<int>(nodes.size());
    nodes.push_back({NodeKind::Factor, graphs[gi].factor});
  }
  for (std::size_t gi = 0; gi < graphs.size(); ++gi)
    for (const GraphEdge& e : graphs[gi].edges) {
      int s = e.src == kFactorNode ? factor_ids[gi] : node_ids[gi][static_cast<std::size_t>(e.src)];
      int d = e.dst == kFactorNode ? factor_ids[gi] : node_ids[gi][static_cast<std::size_t>(e.dst)];
      edges.push_back({s, d, e.type});
    }
  if (opts.scope == GraphScope::TurnLevel && opts.z_cross_links) {
    EdgeType ff = edge_type(NodeKind::Factor, NodeKind::Factor);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi)
      for (std::size_t gj = 0; gj < graphs.size(); ++gj)
        if (gi != gj) edges.push_back({factor_ids[gi], factor_ids[gj], ff});
  }

  Value q = encode_sequence(tape, item.question, head.lstm_question, opts.max_seq_len, true);
  Value a_correct = encode_sequence(tape, item.correct, head.lstm_answer, opts.max_seq_len, true);
  Value a_incorrect = encode_sequence(tape, item.incorrect, head.lstm_answer, opts.max_seq_len, true);

  int q_id = static_cast<int>(nodes.size());
  nodes.push_back({NodeKind::Question, q});
  int a0_id = static_cast<int>(nodes.size());
  nodes.push_back({NodeKind::Answer, item.correct_position == 0 ? a_correct : a_incorrect});
  int a1_id = static_cast<int>(nodes.size());
  nodes.push_back({NodeKind::Answer, item.correct_position == 1 ? a_correct : a_incorrect});

  connect_both(edges, q_id, a0_id, NodeKind::Question, NodeKind::Answer);
  connect_both(edges, q_id, a1_id, NodeKind::Question, NodeKind::Answer);
  connect_both(edges, a0_id, a1_id, NodeKind::Answer, NodeKind::Answer);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    for (std::size_t ni = 0; ni < graphs[gi].nodes.size(); ++ni) {
      NodeKind mk = graphs[gi].nodes[ni].kind;
      connect_both(edges, q_id, node_ids[gi][ni], NodeKind::Question, mk);
      connect_both(edges, a0_id, node_ids[gi][ni], NodeKind::Answer, mk);
      connect_both(edges, a1_id, node_ids[gi][ni], NodeKind::Answer, mk);
    }
    connect_both(edges, q_id, factor_ids[gi], NodeKind::Question, NodeKind::Factor);
    connect_both(edges, a0_id, factor_ids[gi], NodeKind::Answer, NodeKind::Factor);
    connect_both(edges, a1_id, factor_ids[gi], NodeKind::Answer, NodeKind::Factor);
  }

  // 3. graph convolutions, then the pair scorer
  QAConv conv(tape, head, nodes, edges, true);
  for (int l = 0; l < head.conv_layers; ++l) conv.run_layer(l);

  auto score = [&](int answer_id) {
    Value x = vcat({nodes[static_cast<std::size_t>(q_id)].embed,
                    nodes[static_cast<std::size_t>(answer_id)].embed});
    Value w1 = leaf(tape, head.head_w1);
    Value b1 = leaf(tape, head.head_b1);
    Value w2 = leaf(tape, head.head_w2);
    Value b2 = leaf(tape, head.head_b2);
    Value hidden = relu(add(matmul(w1, x), b1));
    return sigmoid(add(matmul(w2, hidden), b2));
  };
  return {score(a0_id), score(a1_id)};
}

double finetune_step(std::span<const ItemRef> batch, ModelParams& encoder, QAHeadParams& head,
                     AdamW& opt, const QAForwardOptions& opts) {
  if (batch.empty()) throw std::invalid_argument("finetune_step: empty batch");
  double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  for (const ItemRef& ref : batch) {
    const QAItem& item = ref.video->qa_items.at(static_cast<std::size_t>(ref.item));
    Tape tape;
    auto [s0, s1] = qa_forward(tape, *ref.video, item, encoder, head, opts);
    Matrix target = Matrix::Zero(2, 1);
    target(item.correct_position, 0) = 1.0;
    Value loss = mse(vcat({s0, s1}), constant(tape, target));
    loss_sum += loss.scalar();
    backward(scale(loss, inv_batch));
  }
  opt.step();
  return loss_sum * inv_batch;
}

double evaluate_accuracy(std::span<const VideoRecord* const> videos, ModelParams& encoder,
                         QAHeadParams& head, const QAForwardOptions& opts) {
  long long total = 0, correct = 0;
  for (const VideoRecord* video : videos) {
    for (const QAItem& item : video->qa_items) {
      QAItem fixed = item;
      fixed.correct_position = 0;
      Tape tape;
      auto [s_correct, s_incorrect] = qa_forward(tape, *video, fixed, encoder, head, opts);
      if (s_correct.scalar() > s_incorrect.scalar()) ++correct;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("evaluate_accuracy: empty dataset");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace stgc
