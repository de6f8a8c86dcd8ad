#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "stgc/model.hpp"
#include "stgc/optim.hpp"

namespace stgc {

enum class GraphScope { TurnLevel, VideoLevel };
const char* graph_scope_name(GraphScope s);
std::optional<GraphScope> parse_graph_scope(const std::string& s);

enum class FinetuneMode { Frozen, SupervisedScratch };
const char* finetune_mode_name(FinetuneMode m);
std::optional<FinetuneMode> parse_finetune_mode(const std::string& s);

/// Single-layer LSTM; gate order: input, forget, cell, output.
struct LstmParams {
  std::array<Parameter, 4> w_x;  // [hidden x input_dim]
  std::array<Parameter, 4> w_h;  // [hidden x hidden]
  std::array<Parameter, 4> b;    // [hidden x 1]

  static LstmParams init(int hidden, int input_dim, Rng& rng);
};

/// Final hidden state of the recurrence over the token rows (truncated to
/// max_len when positive). Throws on an empty sequence.
Value encode_sequence(Tape& tape, const Matrix& tokens, LstmParams& lstm, int max_len,
                      bool trainable = true);

/// GATv2-style per-(edge type, head) parameters: score is
/// att . LeakyReLU(w_left src + w_right dst); messages use w_right.
struct GatParams {
  Parameter w_left;   // [head_dim x d]
  Parameter w_right;  // [head_dim x d]
  Parameter att;      // [1 x head_dim]
};

/// Fine-tuning head: sequence encoders, GATv2 convolutions over the QA graph,
/// and the two-layer sigmoid scorer on [question || answer].
struct QAHeadParams {
  int d = 80;
  int d_q = 10;
  int heads = 4;
  int conv_layers = 2;
  LstmParams lstm_question;
  LstmParams lstm_answer;
  struct Layer {
    std::array<std::vector<GatParams>, kNodeKindCount * kNodeKindCount> per_type;
  };
  std::vector<Layer> conv;
  Parameter head_w1;  // [d x 2d]
  Parameter head_b1;  // [d x 1]
  Parameter head_w2;  // [1 x d]
  Parameter head_b2;  // [1 x 1]

  static QAHeadParams init(int d, int d_q, int heads, int conv_layers, Rng& rng);
  std::vector<std::pair<std::string, Parameter*>> named_params();
  GatParams& gat(int layer, EdgeType type, int head);
};

/// att . LeakyReLU(w_left src + w_right dst); the nonlinearity precedes the
/// attention vector, which is what makes the ranking over sources able to
/// change with the destination (dynamic attention).
Value gatv2_score(Tape& tape, QAHeadParams& params, int layer, EdgeType type, int head, Value src,
                  Value dst, bool trainable = true);

struct QAForwardOptions {
  GraphScope scope = GraphScope::TurnLevel;
  bool trainable_encoder = false;  // frozen by default
  bool z_cross_links = true;
  int max_seq_len = 25;
};

/// Scores for answer positions 0 and 1 (each in (0,1)). The item's
/// correct_position decides which embedding sits at which position and must
/// be 0 or 1.
std::pair<Value, Value> qa_forward(Tape& tape, const VideoRecord& video, const QAItem& item,
                                   ModelParams& encoder, QAHeadParams& head,
                                   const QAForwardOptions& opts);

struct ItemRef {
  const VideoRecord* video = nullptr;
  int item = 0;
};

/// One optimizer step on a batch of QA items: target 1 at the correct
/// position, 0 at the other, MSE over both scores, mean over the batch.
/// Returns the mean loss.
double finetune_step(std::span<const ItemRef> batch, ModelParams& encoder, QAHeadParams& head,
                     AdamW& opt, const QAForwardOptions& opts);

/// Fraction of items where the correct answer outscores the incorrect one
/// (ties count as incorrect). Positions are fixed (correct at 0) so the
/// result is deterministic in params and data.
double evaluate_accuracy(std::span<const VideoRecord* const> videos, ModelParams& encoder,
                         QAHeadParams& head, const QAForwardOptions& opts);

}  // namespace stgc
