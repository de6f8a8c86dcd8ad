#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stgc/checkpoint.hpp"
#include "stgc/data.hpp"
#include "stgc/qa.hpp"
#include "support/gradcheck.hpp"

using namespace stgc;

namespace {

ModelParams tiny_encoder(unsigned seed = 3) {
  ModelDims dims;
  dims.d = 8;
  dims.d_text = 3;
  dims.d_vision = 4;
  dims.d_acoustic = 2;
  dims.heads = 2;
  dims.layers = 2;
  Rng rng(seed);
  return ModelParams::init(dims, rng);
}

QAHeadParams tiny_head(unsigned seed = 4, int d = 8, int d_q = 3) {
  Rng rng(seed);
  return QAHeadParams::init(d, d_q, 2, 2, rng);
}

VideoRecord qa_video(unsigned seed = 6) {
  SynthConfig cfg;
  cfg.videos = 1;
  cfg.turns_min = cfg.turns_max = 2;
  cfg.nodes_min = cfg.nodes_max = 1;
  cfg.d_text = 3;
  cfg.d_vision = 4;
  cfg.d_acoustic = 2;
  cfg.qa_per_video = 1;
  cfg.seed = seed;
  VideoRecord v = generate(cfg)[0];
  v.qa_items[0].correct_position = 0;
  return v;
}

std::vector<Parameter*> ptrs_of(std::vector<std::pair<std::string, Parameter*>> named) {
  std::vector<Parameter*> out;
  for (auto& [n, p] : named) out.push_back(p);
  return out;
}

}  // namespace

TEST_CASE("encode_sequence") {
  QAHeadParams head = tiny_head();
  SUBCASE("empty sequence is an error") {
    Tape tape;
    CHECK_THROWS_AS(encode_sequence(tape, Matrix(0, 3), head.lstm_question, 25), std::invalid_argument);
  }
  SUBCASE("length-1 sequence runs one recurrence step") {
    Rng rng(2);
    Matrix token = gaussian(1, 3, rng);
    Tape tape;
    Value h = encode_sequence(tape, token, head.lstm_question, 25, false);
    CHECK(h.rows() == 8);
    // hand evaluation of one LSTM step from zero state
    Matrix x = token.transpose();
    auto gate = [&](int g) {
      return (head.lstm_question.w_x[static_cast<std::size_t>(g)].value * x +
              head.lstm_question.b[static_cast<std::size_t>(g)].value)
          .eval();
    };
    Matrix i = gate(0).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Matrix g = gate(2).unaryExpr([](double v) { return std::tanh(v); });
    Matrix o = gate(3).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Matrix c = i.cwiseProduct(g);
    Matrix expected = o.cwiseProduct(c.unaryExpr([](double v) { return std::tanh(v); }));
    CHECK((h.val() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("deterministic") {
    Rng rng(8);
    Matrix tokens = gaussian(4, 3, rng);
    Tape t1, t2;
    CHECK(encode_sequence(t1, tokens, head.lstm_answer, 25, false).val() ==
          encode_sequence(t2, tokens, head.lstm_answer, 25, false).val());
  }
  SUBCASE("max_len truncates") {
    Rng rng(8);
    Matrix tokens = gaussian(6, 3, rng);
    Tape tape;
    Value full = encode_sequence(tape, tokens, head.lstm_question, 0, false);
    Value trunc = encode_sequence(tape, tokens, head.lstm_question, 2, false);
    Value prefix = encode_sequence(tape, tokens.topRows(2), head.lstm_question, 25, false);
    CHECK(trunc.val() == prefix.val());
    CHECK_FALSE(full.val() == trunc.val());
  }
  SUBCASE("gradients match finite differences") {
    Rng rng(19);
    Matrix tokens = gaussian(3, 3, rng);
    QAHeadParams h2 = tiny_head(21);
    auto make_loss = [&](Tape& tape) {
      return mean(encode_sequence(tape, tokens, h2.lstm_question, 25, true));
    };
    std::vector<Parameter*> ps;
    for (int g = 0; g < 4; ++g) {
      ps.push_back(&h2.lstm_question.w_x[static_cast<std::size_t>(g)]);
      ps.push_back(&h2.lstm_question.w_h[static_cast<std::size_t>(g)]);
      ps.push_back(&h2.lstm_question.b[static_cast<std::size_t>(g)]);
    }
    auto report = stgc::test::gradcheck(ps, make_loss);
    CHECK_MESSAGE(report.ok, report.worst);
  }
}

TEST_CASE("gatv2 score") {
  QAHeadParams head = tiny_head();
  EdgeType qa = edge_type(NodeKind::Question, NodeKind::Answer);

  SUBCASE("zero attention vector scores zero") {
    head.gat(0, qa, 0).att.value.setZero();
    Tape tape;
    Rng rng(3);
    Value s = gatv2_score(tape, head, 0, qa, 0,
                          constant(tape, gaussian(8, 1, rng)), constant(tape, gaussian(8, 1, rng)),
                          false);
    CHECK(s.scalar() == 0.0);
  }
  SUBCASE("identity transform picks out the source coordinate") {
    GatParams& gp = head.gat(0, qa, 0);
    gp.w_left.value.setZero();
    gp.w_left.value(0, 0) = 1.0;  // left transform reads src[0]
    gp.w_right.value.setZero();
    gp.att.value.setZero();
    gp.att.value(0, 0) = 1.0;
    Tape tape;
    Matrix src = Matrix::Zero(8, 1);
    src(0, 0) = 2.0;
    Value s = gatv2_score(tape, head, 0, qa, 0, constant(tape, src),
                          constant(tape, Matrix::Zero(8, 1)), false);
    CHECK(s.scalar() == doctest::Approx(2.0));
  }
  SUBCASE("unknown edge type") {
    Tape tape;
    Value v = constant(tape, Matrix::Zero(8, 1));
    CHECK_THROWS_AS(
        gatv2_score(tape, head, 0, edge_type(NodeKind::Question, NodeKind::Question), 0, v, v),
        std::invalid_argument);
  }
  SUBCASE("rankings can flip with the destination (dynamic attention)") {
    // pre[0] = src[0] + dst[1], pre[1] = -src[0], att = [1, 2]:
    //   dst[1] = 0  -> score(src=3) > score(src=1)
    //   dst[1] = -4 -> score(src=1) > score(src=3)
    GatParams& gp = head.gat(0, qa, 0);
    int dh = 8 / 2;
    gp.w_left.value = Matrix::Zero(dh, 8);
    gp.w_right.value = Matrix::Zero(dh, 8);
    gp.att.value = Matrix::Zero(1, dh);
    gp.w_left.value(0, 0) = 1.0;
    gp.w_left.value(1, 0) = -1.0;
    gp.w_right.value(0, 1) = 1.0;
    gp.att.value(0, 0) = 1.0;
    gp.att.value(0, 1) = 2.0;
    Tape tape;
    auto vec = [&](double a, double b) {
      Matrix m = Matrix::Zero(8, 1);
      m(0, 0) = a;
      m(1, 0) = b;
      return constant(tape, m);
    };
    double s1d1 = gatv2_score(tape, head, 0, qa, 0, vec(1, 0), vec(0, 0), false).scalar();
    double s2d1 = gatv2_score(tape, head, 0, qa, 0, vec(3, 0), vec(0, 0), false).scalar();
    double s1d2 = gatv2_score(tape, head, 0, qa, 0, vec(1, 0), vec(0, -4), false).scalar();
    double s2d2 = gatv2_score(tape, head, 0, qa, 0, vec(3, 0), vec(0, -4), false).scalar();
    CHECK(s2d1 > s1d1);  // destination one prefers the larger source
    CHECK(s1d2 > s2d2);  // destination two flips the ranking
  }
}

TEST_CASE("qa_forward") {
  ModelParams encoder = tiny_encoder();
  QAHeadParams head = tiny_head();
  VideoRecord video = qa_video();
  QAForwardOptions opts;
  opts.max_seq_len = 25;

  SUBCASE("scores live strictly inside (0, 1)") {
    Tape tape;
    auto [s0, s1] = qa_forward(tape, video, video.qa_items[0], encoder, head, opts);
    CHECK(s0.scalar() > 0.0);
    CHECK(s0.scalar() < 1.0);
    CHECK(s1.scalar() > 0.0);
    CHECK(s1.scalar() < 1.0);
  }
  SUBCASE("identical answers score identically") {
    QAItem item = video.qa_items[0];
    item.incorrect = item.correct;
    Tape tape;
    auto [s0, s1] = qa_forward(tape, video, item, encoder, head, opts);
    CHECK(std::abs(s0.scalar() - s1.scalar()) < 1e-12);
  }
  SUBCASE("position must be assigned") {
    QAItem item = video.qa_items[0];
    item.correct_position = -1;
    Tape tape;
    CHECK_THROWS_AS(qa_forward(tape, video, item, encoder, head, opts), std::invalid_argument);
  }
  SUBCASE("frozen encoder receives no gradient") {
    Tape tape;
    auto [s0, s1] = qa_forward(tape, video, video.qa_items[0], encoder, head, opts);
    backward(add(s0, s1));
    for (auto& [name, p] : encoder.named_params()) {
      CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
    }
    bool head_touched = false;
    for (auto& [name, p] : head.named_params())
      if (p->has_grad && p->grad.cwiseAbs().maxCoeff() > 0.0) head_touched = true;
    CHECK(head_touched);
    for (auto& [name, p] : head.named_params()) p->zero_grad();
  }
  SUBCASE("trainable encoder does receive gradient") {
    QAForwardOptions scratch = opts;
    scratch.trainable_encoder = true;
    Tape tape;
    auto [s0, s1] = qa_forward(tape, video, video.qa_items[0], encoder, head, scratch);
    backward(add(s0, s1));
    double total = 0.0;
    for (auto& [name, p] : encoder.named_params()) total += p->grad.cwiseAbs().sum();
    CHECK(total > 0.0);
    for (auto& [name, p] : encoder.named_params()) p->zero_grad();
    for (auto& [name, p] : head.named_params()) p->zero_grad();
  }
  SUBCASE("video-level scope runs too") {
    QAForwardOptions vid = opts;
    vid.scope = GraphScope::VideoLevel;
    Tape tape;
    auto [s0, s1] = qa_forward(tape, video, video.qa_items[0], encoder, head, vid);
    CHECK(s0.scalar() > 0.0);
    CHECK(s1.scalar() < 1.0);
  }
}

TEST_CASE("head gradients match finite differences") {
  for (unsigned seed = 1; seed <= 3; ++seed) {
    ModelParams encoder = tiny_encoder(seed);
    QAHeadParams head = tiny_head(seed + 50);
    VideoRecord video = qa_video(seed + 10);
    QAForwardOptions opts;

    auto build = [&](int offset) {
      return std::function<Value(Tape&)>([&, offset](Tape& tape) {
        VideoRecord v = video;
        if (offset > 0) {
          v.qa_items[0].question.array() += 0.01 * offset;
          v.turns[0].text.array() += 0.005 * offset;
        }
        auto [s0, s1] = qa_forward(tape, v, v.qa_items[0], encoder, head, opts);
        Matrix target = Matrix::Zero(2, 1);
        target(0, 0) = 1.0;
        return mse(vcat({s0, s1}), constant(tape, target));
      });
    };
    auto make_loss = stgc::test::away_from_kinks(build);
    stgc::test::GradCheckOptions gopts;
    gopts.max_coords_per_tensor = 2;
    auto report = stgc::test::gradcheck(ptrs_of(head.named_params()), make_loss, gopts);
    CHECK_MESSAGE(report.ok, report.worst);
  }
}

TEST_CASE("finetune_step arithmetic and freeze contract") {
  ModelParams encoder = tiny_encoder();
  QAHeadParams head = tiny_head();
  std::uint64_t hash_before = params_hash(encoder.named_params());

  SynthConfig cfg;
  cfg.videos = 3;
  cfg.turns_min = cfg.turns_max = 2;
  cfg.nodes_min = cfg.nodes_max = 1;
  cfg.d_text = 3;
  cfg.d_vision = 4;
  cfg.d_acoustic = 2;
  cfg.qa_per_video = 2;
  cfg.seed = 12;
  std::vector<VideoRecord> videos = generate(cfg);
  Rng rng(3);
  std::vector<ItemRef> refs;
  for (auto& v : videos)
    for (std::size_t q = 0; q < v.qa_items.size(); ++q) {
      v.qa_items[q].correct_position = static_cast<int>(rng() % 2);
      refs.push_back({&v, static_cast<int>(q)});
    }

  QAForwardOptions opts;
  AdamW opt(ptrs_of(head.named_params()), {1e-3, 0.9, 0.999, 1e-8, 0.0});
  double loss1 = finetune_step(refs, encoder, head, opt, opts);
  CHECK(loss1 > 0.0);
  CHECK(std::isfinite(loss1));
  double loss2 = finetune_step(refs, encoder, head, opt, opts);
  CHECK(std::isfinite(loss2));
  CHECK(params_hash(encoder.named_params()) == hash_before);  // frozen encoder untouched

  SUBCASE("empty batch is an error") {
    std::vector<ItemRef> none;
    CHECK_THROWS_AS(finetune_step(none, encoder, head, opt, opts), std::invalid_argument);
  }
}

TEST_CASE("mse loss on a (0.5, 0.5) prediction with binary targets is 0.25") {
  Tape tape;
  Matrix pred(2, 1), target(2, 1);
  pred << 0.5, 0.5;
  target << 1.0, 0.0;
  CHECK(mse(constant(tape, pred), constant(tape, target)).scalar() == doctest::Approx(0.25));
  // perfect scores at the right positions give zero loss
  Matrix exact(2, 1);
  exact << 1.0, 0.0;
  CHECK(mse(constant(tape, exact), constant(tape, target)).scalar() == 0.0);
  // swapping positions together with targets leaves the loss unchanged
  Matrix pred_swapped(2, 1), target_swapped(2, 1);
  pred_swapped << 0.3, 0.8;
  target_swapped << 0.0, 1.0;
  Matrix pred_orig(2, 1), target_orig(2, 1);
  pred_orig << 0.8, 0.3;
  target_orig << 1.0, 0.0;
  CHECK(mse(constant(tape, pred_swapped), constant(tape, target_swapped)).scalar() ==
        doctest::Approx(mse(constant(tape, pred_orig), constant(tape, target_orig)).scalar()));
}

TEST_CASE("evaluate_accuracy") {
  ModelParams encoder = tiny_encoder();
  QAHeadParams head = tiny_head();
  QAForwardOptions opts;

  SUBCASE("empty dataset is an error") {
    std::vector<const VideoRecord*> none;
    CHECK_THROWS_AS(evaluate_accuracy(none, encoder, head, opts), std::invalid_argument);
  }
  SUBCASE("deterministic given params and data") {
    SynthConfig cfg;
    cfg.videos = 4;
    cfg.turns_min = cfg.turns_max = 2;
    cfg.d_text = 3;
    cfg.d_vision = 4;
    cfg.d_acoustic = 2;
    cfg.qa_per_video = 2;
    cfg.seed = 44;
    std::vector<VideoRecord> videos = generate(cfg);
    std::vector<const VideoRecord*> ptrs;
    for (const auto& v : videos) ptrs.push_back(&v);
    double a = evaluate_accuracy(ptrs, encoder, head, opts);
    double b = evaluate_accuracy(ptrs, encoder, head, opts);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}
