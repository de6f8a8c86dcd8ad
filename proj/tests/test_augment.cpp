#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "stgc/augment.hpp"
#include "stgc/model.hpp"

using namespace stgc;

namespace {

ModelParams test_params(unsigned seed = 3) {
  ModelDims dims;
  dims.d = 6;
  dims.d_text = 3;
  dims.d_vision = 4;
  dims.d_acoustic = 2;
  dims.heads = 2;
  dims.layers = 1;
  Rng rng(seed);
  return ModelParams::init(dims, rng);
}

TurnGraph build_graph(Tape& tape, ModelParams& params, int text_nodes, int vision_nodes,
                      int acoustic_nodes, unsigned seed = 11) {
  Rng rng(seed);
  VideoRecord v;
  v.video_id = "aug";
  Turn t;
  t.speaker_id = "spk";
  t.text = text_nodes > 0 ? gaussian(text_nodes, 3, rng) : Matrix(0, 0);
  t.vision = vision_nodes > 0 ? gaussian(vision_nodes, 4, rng) : Matrix(0, 0);
  t.acoustic = acoustic_nodes > 0 ? gaussian(acoustic_nodes, 2, rng) : Matrix(0, 0);
  v.turns.push_back(std::move(t));
  return build_turn_graphs(tape, v, params)[0];
}

}  // namespace

TEST_CASE("node_drop count semantics") {
  ModelParams params = test_params();
  Tape tape;
  TurnGraph g = build_graph(tape, params, 4, 3, 3);  // 10 nodes
  Rng rng(1);

  SUBCASE("ratio 0.5 on 10 nodes drops 5") {
    TurnGraph out = node_drop(g, 0.5, rng);
    CHECK(out.nodes.size() == 5);
    validate_graph(out);
  }
  SUBCASE("ratio 0 is the identity") {
    TurnGraph out = node_drop(g, 0.0, rng);
    CHECK(out.nodes.size() == g.nodes.size());
    CHECK(out.edges.size() == g.edges.size());
  }
}

TEST_CASE("node_drop guard keeps one survivor at ratio 1") {
  ModelParams params = test_params();
  for (int n = 1; n <= 10; ++n) {
    Tape tape;
    TurnGraph g = build_graph(tape, params, n, 0, 0, static_cast<unsigned>(n));
    Rng rng(static_cast<unsigned>(n));
    TurnGraph out = node_drop(g, 1.0, rng);
    CHECK(out.nodes.size() == 1);
    validate_graph(out);
  }
}

TEST_CASE("edge_perturb drops only modality edges") {
  ModelParams params = test_params();
  Tape tape;
  TurnGraph g = build_graph(tape, params, 2, 1, 1);  // 4 nodes: 12 modality edges
  Rng rng(5);

  SUBCASE("ratio 0 is the identity") {
    TurnGraph out = edge_perturb(g, 0.0, rng);
    CHECK(out.edges.size() == g.edges.size());
  }
  SUBCASE("ratio 0.25 on 12 edges removes 3") {
    TurnGraph out = edge_perturb(g, 0.25, rng);
    CHECK(out.modality_edge_count() == 9);
    CHECK(out.factor_edge_count() == g.factor_edge_count());
    validate_graph(out);
  }
  SUBCASE("factor edges survive 1000 trials at every ratio") {
    for (int trial = 0; trial < 1000; ++trial) {
      double ratio = (trial % 11) / 10.0;
      TurnGraph out = edge_perturb(g, ratio, rng);
      CHECK(out.factor_edge_count() == 2 * static_cast<int>(out.nodes.size()));
      for (int i = 0; i < static_cast<int>(out.nodes.size()); ++i) CHECK(out.has_factor_edges(i));
    }
  }
}

TEST_CASE("node_mask zeroes embeddings but keeps topology") {
  ModelParams params = test_params();
  Tape tape;
  TurnGraph g = build_graph(tape, params, 3, 2, 2);  // 7 nodes
  Rng rng(8);

  SUBCASE("floor arithmetic: ratio 0.3 of 7 masks 2") {
    TurnGraph out = node_mask(g, 0.3, rng);
    int zeroed = 0;
    for (const GraphNode& n : out.nodes)
      if (n.embed.val().cwiseAbs().maxCoeff() == 0.0) ++zeroed;
    CHECK(zeroed == 2);
    CHECK(out.edges.size() == g.edges.size());
    CHECK(out.nodes.size() == g.nodes.size());
  }
  SUBCASE("ratio 1 masks everything, edges intact") {
    TurnGraph out = node_mask(g, 1.0, rng);
    for (const GraphNode& n : out.nodes) CHECK(n.embed.val().cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.edges.size() == g.edges.size());
    CHECK(out.factor.val() == g.factor.val());  // z is never masked
  }
  SUBCASE("ratio 0 is the identity") {
    TurnGraph out = node_mask(g, 0.0, rng);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      CHECK(out.nodes[i].embed.val() == g.nodes[i].embed.val());
  }
}

TEST_CASE("subgraph_sample") {
  ModelParams params = test_params();
  Tape tape;
  TurnGraph g = build_graph(tape, params, 4, 4, 4);
  Rng rng(2);

  SUBCASE("ratio 1 on a complete graph keeps every node") {
    for (int trial = 0; trial < 20; ++trial) {
      TurnGraph out = subgraph_sample(g, 1.0, rng);
      CHECK(out.nodes.size() == g.nodes.size());
    }
  }
  SUBCASE("tiny ratio keeps a single node plus z") {
    TurnGraph out = subgraph_sample(g, 0.01, rng);
    CHECK(out.nodes.size() == 1);
    CHECK(out.factor_edge_count() == 2);
    validate_graph(out);
  }
  SUBCASE("output nodes are a subset of the input nodes") {
    for (int trial = 0; trial < 50; ++trial) {
      double ratio = (trial % 10 + 1) / 10.0;
      TurnGraph out = subgraph_sample(g, ratio, rng);
      std::set<const void*> originals;
      for (const GraphNode& n : g.nodes) originals.insert(n.embed.val().data());
      for (const GraphNode& n : out.nodes) CHECK(originals.count(n.embed.val().data()) == 1);
    }
  }
}

TEST_CASE("make_views") {
  ModelParams params = test_params();
  Tape tape;
  TurnGraph g = build_graph(tape, params, 2, 2, 2);
  g.turn_index = 4;

  SUBCASE("only node_mask at ratio 0 reproduces the graph") {
    AugmentationConfig cfg;
    cfg.enabled = {false, false, true, false};
    cfg.ratio = {0.0, 0.0, 0.0, 0.0};
    Rng rng(3);
    AugmentedPair pair = make_views(g, cfg, rng);
    CHECK(pair.turn_index == 4);
    CHECK(pair.view1.nodes.size() == g.nodes.size());
    CHECK(pair.view2.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      CHECK(pair.view1.nodes[i].embed.val() == g.nodes[i].embed.val());
  }
  SUBCASE("fixed seed reproduces the pair") {
    AugmentationConfig cfg;
    Rng r1(42), r2(42);
    AugmentedPair p1 = make_views(g, cfg, r1);
    AugmentedPair p2 = make_views(g, cfg, r2);
    CHECK(p1.view1.nodes.size() == p2.view1.nodes.size());
    CHECK(p1.view1.edges.size() == p2.view1.edges.size());
    CHECK(p1.view2.nodes.size() == p2.view2.nodes.size());
    CHECK(p1.view2.edges.size() == p2.view2.edges.size());
  }
  SUBCASE("no augmentation enabled is an error") {
    AugmentationConfig cfg;
    cfg.enabled = {false, false, false, false};
    Rng rng(1);
    CHECK_THROWS_AS(make_views(g, cfg, rng), std::invalid_argument);
  }
  SUBCASE("invalid ratio is rejected") {
    AugmentationConfig cfg;
    cfg.ratio[0] = 1.5;
    Rng rng(1);
    CHECK_THROWS_AS(make_views(g, cfg, rng), std::invalid_argument);
  }
}

TEST_CASE("factorization immunity across 1000 random augmentations") {
  ModelParams params = test_params();
  Rng rng(99);
  std::uniform_int_distribution<int> size_dist(1, 4);
  std::uniform_real_distribution<double> ratio_dist(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Tape tape;
    TurnGraph g = build_graph(tape, params, size_dist(rng), size_dist(rng), size_dist(rng),
                              static_cast<unsigned>(trial));
    Matrix z_before = g.factor.val();
    AugKind kind = static_cast<AugKind>(trial % kAugKindCount);
    TurnGraph out = apply_augmentation(kind, g, ratio_dist(rng), rng);
    CHECK(out.factor.valid());
    CHECK(out.factor.val() == z_before);
    validate_graph(out);  // includes: every surviving node keeps both z-edges
  }
}

TEST_CASE("node selection is uniform") {
  ModelParams params = test_params();
  Tape tape;
  TurnGraph g = build_graph(tape, params, 4, 3, 3);  // 10 nodes, ratio 0.1 drops exactly 1
  Rng rng(7);
  const int trials = 10000;
  std::vector<int> dropped(10, 0);
  for (int trial = 0; trial < trials; ++trial) {
    TurnGraph out = node_drop(g, 0.1, rng);
    std::set<const void*> kept;
    for (const GraphNode& n : out.nodes) kept.insert(n.embed.val().data());
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (kept.count(g.nodes[i].embed.val().data()) == 0) dropped[i]++;
  }
  double expect = trials / 10.0;
  double sigma = std::sqrt(trials * 0.1 * 0.9);
  for (int i = 0; i < 10; ++i) CHECK(std::abs(dropped[i] - expect) <= 3.0 * sigma);
}
