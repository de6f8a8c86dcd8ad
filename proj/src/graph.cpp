#include "stgc/graph.hpp"

#include <stdexcept>

namespace stgc {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Text: return "text";
    case Modality::Vision: return "vision";
    case Modality::Acoustic: return "acoustic";
  }
  return "?";
}

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Text: return "text";
    case NodeKind::Vision: return "vision";
    case NodeKind::Acoustic: return "acoustic";
    case NodeKind::Factor: return "factor";
    case NodeKind::Question: return "question";
    case NodeKind::Answer: return "answer";
  }
  return "?";
}

std::string edge_type_name(EdgeType t) {
  return std::string(kind_name(edge_src_kind(t))) + "->" + kind_name(edge_dst_kind(t));
}

std::vector<int> base_edge_type_ids() {
  std::vector<int> ids;
  for (int s = 0; s <= static_cast<int>(NodeKind::Factor); ++s)
    for (int d = 0; d <= static_cast<int>(NodeKind::Factor); ++d)
      ids.push_back(edge_type(static_cast<NodeKind>(s), static_cast<NodeKind>(d)).id);
  return ids;
}

std::vector<int> qa_edge_type_ids() {
  std::vector<int> ids;
  for (int s = 0; s < kNodeKindCount; ++s)
    for (int d = 0; d < kNodeKindCount; ++d) {
      if (s == static_cast<int>(NodeKind::Question) && d == static_cast<int>(NodeKind::Question))
        continue;
      ids.push_back(edge_type(static_cast<NodeKind>(s), static_cast<NodeKind>(d)).id);
    }
  return ids;
}

const Matrix& Turn::features(Modality m) const {
  switch (m) {
    case Modality::Text: return text;
    case Modality::Vision: return vision;
    case Modality::Acoustic: return acoustic;
  }
  throw std::logic_error("Turn::features: bad modality");
}

Matrix& Turn::features(Modality m) {
  return const_cast<Matrix&>(static_cast<const Turn*>(this)->features(m));
}

void validate_record(const VideoRecord& v, const int* expect_dims) {
  if (v.video_id.empty()) throw std::invalid_argument("record: empty video_id");
  if (v.turns.empty()) throw std::invalid_argument("record '" + v.video_id + "': no turns");
  for (std::size_t ti = 0; ti < v.turns.size(); ++ti) {
    const Turn& t = v.turns[ti];
    if (t.node_count() == 0)
      throw std::invalid_argument("record '" + v.video_id + "': turn " + std::to_string(ti) +
                                  " has no features in any modality");
    for (int m = 0; m < kModalityCount; ++m) {
      const Matrix& f = t.features(static_cast<Modality>(m));
      if (f.rows() == 0) continue;
      if (expect_dims != nullptr && f.cols() != expect_dims[m])
        throw std::invalid_argument("record '" + v.video_id + "': turn " + std::to_string(ti) +
                                    " modality " + modality_name(static_cast<Modality>(m)) +
                                    " has dim " + std::to_string(f.cols()) + ", expected " +
                                    std::to_string(expect_dims[m]));
      if (!f.allFinite())
        throw std::invalid_argument("record '" + v.video_id + "': turn " + std::to_string(ti) +
                                    " modality " + modality_name(static_cast<Modality>(m)) +
                                    " has non-finite values");
    }
  }
  for (std::size_t qi = 0; qi < v.qa_items.size(); ++qi) {
    const QAItem& q = v.qa_items[qi];
    if (q.question.rows() == 0 || q.correct.rows() == 0 || q.incorrect.rows() == 0)
      throw std::invalid_argument("record '" + v.video_id + "': qa item " + std::to_string(qi) +
                                  " has an empty sequence");
  }
}

int TurnGraph::modality_edge_count() const {
  int n = 0;
  for (const GraphEdge& e : edges)
    if (e.src != kFactorNode && e.dst != kFactorNode) ++n;
  return n;
}

int TurnGraph::factor_edge_count() const {
  int n = 0;
  for (const GraphEdge& e : edges)
    if (e.src == kFactorNode || e.dst == kFactorNode) ++n;
  return n;
}

bool TurnGraph::has_factor_edges(int node) const {
  bool to_z = false, from_z = false;
  for (const GraphEdge& e : edges) {
    if (e.src == node && e.dst == kFactorNode) to_z = true;
    if (e.src == kFactorNode && e.dst == node) from_z = true;
  }
  return to_z && from_z;
}

void validate_graph(const TurnGraph& g) {
  if (g.nodes.empty()) throw std::invalid_argument("graph: no modality nodes");
  if (!g.factor.valid()) throw std::invalid_argument("graph: missing factorization node");
  int n = static_cast<int>(g.nodes.size());
  for (const GraphNode& node : g.nodes)
    if (!is_modality(node.kind)) throw std::invalid_argument("graph: non-modality node in node list");
  for (const GraphEdge& e : g.edges) {
    NodeKind sk, dk;
    if (e.src == kFactorNode) {
      sk = NodeKind::Factor;
    } else if (e.src >= 0 && e.src < n) {
      sk = g.nodes[static_cast<std::size_t>(e.src)].kind;
    } else {
      throw std::invalid_argument("graph: edge source out of range");
    }
    if (e.dst == kFactorNode) {
      dk = NodeKind::Factor;
    } else if (e.dst >= 0 && e.dst < n) {
      dk = g.nodes[static_cast<std::size_t>(e.dst)].kind;
    } else {
      throw std::invalid_argument("graph: edge destination out of range");
    }
    if (!(edge_type(sk, dk) == e.type))
      throw std::invalid_argument("graph: edge type " + edge_type_name(e.type) +
                                  " inconsistent with endpoint kinds");
    if (e.src == kFactorNode && e.dst == kFactorNode)
      throw std::invalid_argument("graph: factor self-loop");
  }
  for (int i = 0; i < n; ++i)
    if (!g.has_factor_edges(i))
      throw std::invalid_argument("graph: modality node " + std::to_string(i) +
                                  " lost its factorization edges");
}

long long count_edges(const std::vector<int>& turn_sizes, EdgeCountMode mode) {
  if (turn_sizes.empty()) throw std::invalid_argument("count_edges: empty turn size list");
  for (int n : turn_sizes)
    if (n < 1) throw std::invalid_argument("count_edges: turn sizes must be >= 1");
  if (mode == EdgeCountMode::VideoLevel) {
    long long total = 0;
    for (int n : turn_sizes) total += n;
    return total * (total - 1);
  }
  long long within = 0, factor = 0;
  for (int n : turn_sizes) {
    within += static_cast<long long>(n) * (n - 1);
    factor += 2LL * n;
  }
  long long s = static_cast<long long>(turn_sizes.size());
  return within + factor + s * (s - 1);
}

}  // namespace stgc
