#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgc/tape.hpp"

namespace stgc {

enum class Modality : std::uint8_t { Text = 0, Vision = 1, Acoustic = 2 };
constexpr int kModalityCount = 3;
const char* modality_name(Modality m);

/// Node roles appearing across the pretraining and question-answering graphs.
enum class NodeKind : std::uint8_t {
  Text = 0,
  Vision = 1,
  Acoustic = 2,
  Factor = 3,
  Question = 4,
  Answer = 5,
};
constexpr int kNodeKindCount = 6;
const char* kind_name(NodeKind k);
inline NodeKind kind_of(Modality m) { return static_cast<NodeKind>(m); }
inline bool is_modality(NodeKind k) { return static_cast<int>(k) < kModalityCount; }

/// Edge parameters are shared per ordered (source kind, destination kind)
/// pair rather than per edge, so they generalize across variable-length turns.
struct EdgeType {
  std::uint8_t id = 0;
  friend bool operator==(EdgeType a, EdgeType b) { return a.id == b.id; }
};
inline EdgeType edge_type(NodeKind src, NodeKind dst) {
  return EdgeType{static_cast<std::uint8_t>(static_cast<int>(src) * kNodeKindCount + static_cast<int>(dst))};
}
inline NodeKind edge_src_kind(EdgeType t) { return static_cast<NodeKind>(t.id / kNodeKindCount); }
inline NodeKind edge_dst_kind(EdgeType t) { return static_cast<NodeKind>(t.id % kNodeKindCount); }
std::string edge_type_name(EdgeType t);

/// Edge-type ids over {text, vision, acoustic, factor}: the 9 ordered modality
/// pairs, factor<->modality in both directions, and factor->factor.
std::vector<int> base_edge_type_ids();
/// Everything base_edge_type_ids() has plus the types involving question and
/// answer nodes (question->question never occurs: there is one question node).
std::vector<int> qa_edge_type_ids();

/// One speaking turn: per-modality feature sequences [N_m x d_m]. A modality
/// may be empty, but at least one must have a row.
struct Turn {
  std::string speaker_id;
  Matrix text;
  Matrix vision;
  Matrix acoustic;

  const Matrix& features(Modality m) const;
  Matrix& features(Modality m);
  Eigen::Index node_count() const { return text.rows() + vision.rows() + acoustic.rows(); }
};

/// Question/answer item; token embeddings row-per-token. correct_position is
/// assigned (and re-randomized) at training time.
struct QAItem {
  Matrix question;
  Matrix correct;
  Matrix incorrect;
  int correct_position = -1;
};

struct VideoRecord {
  std::string video_id;
  std::vector<Turn> turns;
  std::vector<QAItem> qa_items;
};

/// Throws std::invalid_argument describing the first violated invariant.
/// `expect_dims`, when non-null, must hold {d_text, d_vision, d_acoustic}.
void validate_record(const VideoRecord& v, const int* expect_dims = nullptr);

constexpr int kFactorNode = -1;  // edge endpoint id of the factorization node

struct GraphNode {
  NodeKind kind;
  int source_turn = 0;  // turn the node came from (video-level graphs mix turns)
  Value embed;
};

struct GraphEdge {
  int src = 0;  // node index, or kFactorNode
  int dst = 0;
  EdgeType type;
};

/// Directed graph over the modality nodes of one speaking turn (or of a whole
/// video in video-level mode) plus one factorization node z. z and its edges
/// are structural: augmentations never remove or re-embed them.
struct TurnGraph {
  int turn_index = 0;
  std::vector<GraphNode> nodes;  // modality nodes only; z is held separately
  std::vector<GraphEdge> edges;  // modality-modality and factor edges
  Value factor;

  int modality_edge_count() const;
  int factor_edge_count() const;
  bool has_factor_edges(int node) const;  // both directions present
};

/// Structural invariants of a (possibly augmented) TurnGraph: >= 1 modality
/// node, edge endpoints in range, edge types consistent with endpoint kinds,
/// and every modality node linked to z in both directions.
void validate_graph(const TurnGraph& g);

enum class EdgeCountMode { VideoLevel, Factorized };

/// Directed-edge totals for a video with the given per-turn node counts.
/// VideoLevel: N(N-1) over N = sum of counts. Factorized: within-turn complete
/// graphs + 2 factor edges per node + a complete digraph over the S factor
/// nodes. The within-turn unordered pair count is exactly half the directed
/// modality-edge term.
long long count_edges(const std::vector<int>& turn_sizes, EdgeCountMode mode);

}  // namespace stgc
