#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "stgc/model.hpp"
#include "support/gradcheck.hpp"

using namespace stgc;

namespace {

Matrix colvec(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

ModelParams small_params(int d = 8, int heads = 2, int layers = 2, unsigned seed = 5) {
  ModelDims dims;
  dims.d = d;
  dims.d_text = 3;
  dims.d_vision = 4;
  dims.d_acoustic = 2;
  dims.heads = heads;
  dims.layers = layers;
  Rng rng(seed);
  return ModelParams::init(dims, rng);
}

VideoRecord random_video(int turns, int nodes_per_modality, unsigned seed) {
  Rng rng(seed);
  VideoRecord v;
  v.video_id = "vid";
  for (int t = 0; t < turns; ++t) {
    Turn turn;
    turn.speaker_id = "spk" + std::to_string(t % 2);
    turn.text = gaussian(nodes_per_modality, 3, rng);
    turn.vision = gaussian(nodes_per_modality, 4, rng);
    turn.acoustic = gaussian(nodes_per_modality, 2, rng);
    v.turns.push_back(std::move(turn));
  }
  return v;
}

}  // namespace

TEST_CASE("raw score arithmetic") {
  // d = 2, one head, identity projection, att = [1 0 0 0]
  ModelParams params = small_params(2, 1, 1);
  EdgeType tt = edge_type(NodeKind::Text, NodeKind::Text);
  auto& eh = params.layers[0].at(tt, 0);
  eh.proj.value = Matrix::Identity(2, 2);
  eh.att.value = Matrix::Zero(1, 4);
  eh.att.value(0, 0) = 1.0;

  Tape tape;
  SUBCASE("positive branch passes through") {
    Value src = constant(tape, colvec({1.0, 2.0}));
    Value dst = constant(tape, colvec({3.0, 4.0}));
    Value beta = raw_score(tape, params.layers[0], tt, 0, src, dst);
    CHECK(beta.scalar() == doctest::Approx(1.0));
  }
  SUBCASE("negative branch uses slope 0.2") {
    Value src = constant(tape, colvec({-1.0, 2.0}));
    Value dst = constant(tape, colvec({3.0, 4.0}));
    Value beta = raw_score(tape, params.layers[0], tt, 0, src, dst);
    CHECK(beta.scalar() == doctest::Approx(-0.2));
  }
  SUBCASE("scaling the attention vector scales the score") {
    Value src = constant(tape, colvec({1.0, 2.0}));
    Value dst = constant(tape, colvec({3.0, 4.0}));
    double base = raw_score(tape, params.layers[0], tt, 0, src, dst).scalar();
    eh.att.value *= 3.0;
    double scaled = raw_score(tape, params.layers[0], tt, 0, src, dst).scalar();
    CHECK(scaled == doctest::Approx(3.0 * base));
  }
  SUBCASE("unknown edge type") {
    Value src = constant(tape, colvec({1.0, 2.0}));
    CHECK_THROWS_WITH_AS(
        raw_score(tape, params.layers[0], edge_type(NodeKind::Question, NodeKind::Text), 0, src, src),
        doctest::Contains("unknown edge type"), std::invalid_argument);
  }
}

TEST_CASE("normalize_scores") {
  Tape tape;
  SUBCASE("equal scores over four neighbors") {
    std::vector<Value> betas(4, scalar(tape, 1.7));
    Value alphas = normalize_scores(betas);
    for (int i = 0; i < 4; ++i) CHECK(alphas.val()(i, 0) == doctest::Approx(0.25));
  }
  SUBCASE("hand softmax of [0, ln 3]") {
    std::vector<Value> betas{scalar(tape, 0.0), scalar(tape, std::log(3.0))};
    Value alphas = normalize_scores(betas);
    CHECK(std::abs(alphas.val()(0, 0) - 0.25) < 1e-12);
    CHECK(std::abs(alphas.val()(1, 0) - 0.75) < 1e-12);
  }
  SUBCASE("constant shifts cancel") {
    std::vector<Value> a{scalar(tape, 0.5), scalar(tape, -1.0)};
    std::vector<Value> b{scalar(tape, 2.5), scalar(tape, 1.0)};
    CHECK((normalize_scores(a).val() - normalize_scores(b).val()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("empty neighborhood is an error") {
    std::vector<Value> none;
    CHECK_THROWS_AS(normalize_scores(none), std::invalid_argument);
  }
}

TEST_CASE("single neighbor: update equals the projected neighbor across heads") {
  ModelParams params = small_params(4, 2, 1);
  Tape tape;
  Rng rng(9);
  Matrix e0 = gaussian(4, 1, rng), e1 = gaussian(4, 1, rng);
  TurnGraph g;
  g.turn_index = 0;
  g.nodes.push_back({NodeKind::Text, 0, constant(tape, e0)});
  g.nodes.push_back({NodeKind::Text, 0, constant(tape, e1)});
  g.edges.push_back({0, 1, edge_type(NodeKind::Text, NodeKind::Text)});
  g.factor = constant(tape, gaussian(4, 1, rng));

  TurnGraph out = update_nodes(tape, g, params, 0);
  EdgeType tt = edge_type(NodeKind::Text, NodeKind::Text);
  Matrix expected(4, 1);
  expected << params.layers[0].at(tt, 0).proj.value * e1, params.layers[0].at(tt, 1).proj.value * e1;
  CHECK((out.nodes[0].embed.val() - expected).cwiseAbs().maxCoeff() < 1e-12);
  // node 1 has no outgoing edges here, so it keeps its embedding
  CHECK(out.nodes[1].embed.val() == e1);
}

TEST_CASE("identical neighbors make the update independent of attention") {
  ModelParams params = small_params(4, 2, 1);
  Tape tape;
  Rng rng(12);
  Matrix shared = gaussian(4, 1, rng);
  TurnGraph g;
  g.nodes.push_back({NodeKind::Text, 0, constant(tape, gaussian(4, 1, rng))});
  g.nodes.push_back({NodeKind::Vision, 0, constant(tape, shared)});
  g.nodes.push_back({NodeKind::Vision, 0, constant(tape, shared)});
  g.edges.push_back({0, 1, edge_type(NodeKind::Text, NodeKind::Vision)});
  g.edges.push_back({0, 2, edge_type(NodeKind::Text, NodeKind::Vision)});
  g.factor = constant(tape, gaussian(4, 1, rng));

  TurnGraph out = update_nodes(tape, g, params, 0);
  EdgeType tv = edge_type(NodeKind::Text, NodeKind::Vision);
  Matrix expected(4, 1);
  expected << params.layers[0].at(tv, 0).proj.value * shared,
      params.layers[0].at(tv, 1).proj.value * shared;
  CHECK((out.nodes[0].embed.val() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("factor update is the attention-weighted mix of projected modality nodes") {
  // independent re-derivation with plain Eigen on a 3-node graph
  ModelParams params = small_params(4, 2, 1);
  VideoRecord v = random_video(1, 1, 31);  // one turn: 1 text + 1 vision + 1 acoustic node
  Tape tape;
  auto graphs = build_turn_graphs(tape, v, params);
  std::vector<Matrix> embeds;
  std::vector<NodeKind> kinds;
  for (const GraphNode& n : graphs[0].nodes) {
    embeds.push_back(n.embed.val());
    kinds.push_back(n.kind);
  }
  Matrix z0 = graphs[0].factor.val();

  EncodeOptions opts;
  TurnGraph out = update_nodes(tape, graphs[0], params, 0, opts);

  int dh = params.dims.head_dim();
  Matrix expected(params.dims.d, 1);
  for (int h = 0; h < params.dims.heads; ++h) {
    std::vector<double> beta;
    std::vector<Matrix> proj;
    for (std::size_t k = 0; k < embeds.size(); ++k) {
      EdgeType ft = edge_type(NodeKind::Factor, kinds[k]);
      const auto& eh = params.layers[0].at(ft, h);
      Matrix pz = eh.proj.value * z0;
      Matrix pk = eh.proj.value * embeds[k];
      Matrix cat(2 * dh, 1);
      cat << pz, pk;
      double pre = (eh.att.value * cat)(0, 0);
      beta.push_back(pre >= 0 ? pre : 0.2 * pre);
      proj.push_back(pk);
    }
    double mx = *std::max_element(beta.begin(), beta.end());
    double denom = 0;
    for (double b : beta) denom += std::exp(b - mx);
    Matrix head_out = Matrix::Zero(dh, 1);
    double alpha_sum = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) {
      double alpha = std::exp(beta[k] - mx) / denom;
      alpha_sum += alpha;
      head_out += alpha * proj[k];
    }
    CHECK(alpha_sum == doctest::Approx(1.0));
    expected.middleRows(h * dh, dh) = head_out;
  }
  CHECK((out.factor.val() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("update is equivariant under node relabeling") {
  ModelParams params = small_params(4, 2, 1);
  VideoRecord v = random_video(1, 2, 17);
  Tape tape;
  auto graphs = build_turn_graphs(tape, v, params);
  TurnGraph base = graphs[0];
  TurnGraph out1 = update_nodes(tape, base, params, 0);

  // reverse the node order, remapping edges
  int n = static_cast<int>(base.nodes.size());
  TurnGraph perm;
  perm.turn_index = base.turn_index;
  perm.factor = base.factor;
  for (int i = n - 1; i >= 0; --i) perm.nodes.push_back(base.nodes[static_cast<std::size_t>(i)]);
  auto remap = [n](int id) { return id == kFactorNode ? kFactorNode : n - 1 - id; };
  for (const GraphEdge& e : base.edges) perm.edges.push_back({remap(e.src), remap(e.dst), e.type});
  TurnGraph out2 = update_nodes(tape, perm, params, 0);

  for (int i = 0; i < n; ++i)
    CHECK((out2.nodes[static_cast<std::size_t>(n - 1 - i)].embed.val() -
           out1.nodes[static_cast<std::size_t>(i)].embed.val())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  CHECK((out2.factor.val() - out1.factor.val()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention normalizes to one for every node and head") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    ModelParams params = small_params(8, 4, 2, seed);
    VideoRecord v = random_video(2 + static_cast<int>(seed % 3), 1 + static_cast<int>(seed % 2), seed);
    Tape tape;
    auto graphs = build_turn_graphs(tape, v, params);
    AttentionProbe probe;
    EncodeOptions opts;
    opts.probe = &probe;
    encode_graphs(tape, graphs, params, opts);
    std::map<std::tuple<int, int, int>, double> sums;
    for (const auto& e : probe.entries) sums[{e.layer, e.head, e.anchor}] += e.alpha;
    CHECK(sums.size() > 0);
    for (const auto& [key, sum] : sums) CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("mean_readout bypasses factor attention and averages node embeddings") {
  ModelParams params = small_params();
  VideoRecord v = random_video(2, 2, 23);
  Tape tape;
  auto graphs = build_turn_graphs(tape, v, params);
  Matrix seed_value = graphs[0].factor.val();
  EncodeOptions opts;
  opts.mode = FactorMode::MeanReadout;
  std::vector<Value> outs = encode_graphs(tape, graphs, params, opts);
  REQUIRE(outs.size() == 2);
  for (std::size_t t = 0; t < graphs.size(); ++t) {
    Matrix manual = Matrix::Zero(params.dims.d, 1);
    for (const GraphNode& n : graphs[t].nodes) manual += n.embed.val();
    manual /= static_cast<double>(graphs[t].nodes.size());
    CHECK((outs[t].val() - manual).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(graphs[t].factor.val() == seed_value);  // z never attends nor updates
  }
}

TEST_CASE("one-turn video: factorized output equals video-level output") {
  ModelParams params = small_params();
  VideoRecord v = random_video(1, 2, 29);
  Tape tape;
  EncodeOptions fac;
  fac.mode = FactorMode::Factorized;
  std::vector<Value> zf = encode_video(tape, v, params, fac);
  EncodeOptions vid;
  vid.mode = FactorMode::VideoLevel;
  std::vector<Value> zv = encode_video(tape, v, params, vid);
  REQUIRE(zf.size() == 1);
  REQUIRE(zv.size() == 1);
  CHECK((zf[0].val() - zv[0].val()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("factor outputs depend on other turns only through their factor nodes") {
  VideoRecord v = random_video(2, 2, 41);
  VideoRecord perturbed = v;
  perturbed.turns[1].text.array() += 0.5;

  auto encode_z0 = [&](const VideoRecord& video, int layers, bool cross) {
    ModelParams params = small_params(8, 2, layers, 77);
    Tape tape;
    EncodeOptions opts;
    opts.z_cross_links = cross;
    return encode_video(tape, video, params, opts)[0].val();
  };

  // one layer with cross links: other turns contribute only their (input) factor
  // seed, which does not depend on their features
  CHECK((encode_z0(v, 1, true) - encode_z0(perturbed, 1, true)).cwiseAbs().maxCoeff() < 1e-15);
  // two layers without cross links: no path from the other turn at all
  CHECK((encode_z0(v, 2, false) - encode_z0(perturbed, 2, false)).cwiseAbs().maxCoeff() < 1e-15);
  // with two layers and cross links the dependence flows through z (allowed);
  // recorded, not asserted
  (void)encode_z0(v, 2, true);
}

TEST_CASE("zeroed attention vectors give uniform scores within and across turns") {
  ModelParams params = small_params(8, 2, 2, 3);
  for (auto& layer : params.layers)
    for (int tid : base_edge_type_ids())
      for (auto& eh : layer.per_type[static_cast<std::size_t>(tid)]) eh.att.value.setZero();

  VideoRecord v = random_video(3, 2, 71);
  Tape tape;
  std::vector<TurnGraph> graphs{build_video_graph(tape, v, params)};
  AttentionProbe probe;
  EncodeOptions opts;
  opts.mode = FactorMode::VideoLevel;
  opts.probe = &probe;
  encode_graphs(tape, graphs, params, opts);

  double within_sum = 0, cross_sum = 0;
  long long within_n = 0, cross_n = 0;
  for (const auto& e : probe.entries) {
    if (e.anchor_is_factor || e.neighbor_is_factor) continue;
    (e.anchor_turn == e.neighbor_turn ? within_sum : cross_sum) += e.alpha;
    (e.anchor_turn == e.neighbor_turn ? within_n : cross_n) += 1;
  }
  REQUIRE(within_n > 0);
  REQUIRE(cross_n > 0);
  double ratio = (cross_sum / cross_n) / (within_sum / within_n) - 1.0;
  CHECK(std::abs(ratio) < 1e-12);
}

TEST_CASE("attention dropout masks normalized scores during training only") {
  ModelParams params = small_params();
  VideoRecord v = random_video(2, 2, 57);
  Tape tape;
  auto graphs = build_turn_graphs(tape, v, params);
  Rng rng(4);
  EncodeOptions opts;
  opts.attention_dropout = 0.5;
  opts.rng = &rng;
  std::vector<Value> dropped = encode_graphs(tape, graphs, params, opts);
  auto graphs2 = build_turn_graphs(tape, v, params);
  EncodeOptions plain;
  std::vector<Value> clean = encode_graphs(tape, graphs2, params, plain);
  REQUIRE(dropped.size() == clean.size());
  bool differs = false;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(dropped[i].val().allFinite());
    if ((dropped[i].val() - clean[i].val()).cwiseAbs().maxCoeff() > 1e-12) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("encoder gradients match finite differences") {
  for (unsigned seed = 1; seed <= 3; ++seed) {
    ModelParams params = small_params(4, 2, 2, seed);
    VideoRecord v = random_video(2, 1, seed + 100);
    Rng probe_rng(seed);
    Matrix probe_vec = gaussian(4, 1, probe_rng);

    auto build = [&](int offset) {
      return std::function<Value(Tape&)>([&, offset](Tape& tape) {
        VideoRecord video = v;
        if (offset > 0) video.turns[0].text.array() += 0.01 * offset;
        EncodeOptions opts;
        std::vector<Value> zs = encode_video(tape, video, params, opts);
        Value acc = dot(zs[0], constant(tape, probe_vec));
        for (std::size_t i = 1; i < zs.size(); ++i)
          acc = add(acc, dot(zs[i], constant(tape, probe_vec)));
        return tanh(acc);
      });
    };
    auto make_loss = stgc::test::away_from_kinks(build);

    std::vector<Parameter*> ptrs;
    for (auto& [name, p] : params.named_params()) ptrs.push_back(p);
    stgc::test::GradCheckOptions opts;
    opts.max_coords_per_tensor = 4;
    auto report = stgc::test::gradcheck(ptrs, make_loss, opts);
    CHECK_MESSAGE(report.ok, report.worst);
  }
}
