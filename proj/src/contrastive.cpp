#include "stgc/contrastive.hpp"

#include <cmath>

namespace stgc {

double cosine(const Matrix& a, const Matrix& b) {
  double denom = a.norm() * b.norm();
  if (denom < 1e-12) denom = 1e-12;
  return (a.cwiseProduct(b)).sum() / denom;
}

Value infonce_turn_loss(const ContrastiveBatch& batch, std::size_t s, int anchor) {
  if (batch.tau <= 0.0) throw std::invalid_argument("infonce_turn_loss: tau must be positive");
  if (anchor != 1 && anchor != 2) throw std::invalid_argument("infonce_turn_loss: anchor must be 1 or 2");
  if (s >= batch.turns.size()) throw std::invalid_argument("infonce_turn_loss: turn index out of range");
  if (batch.turns.size() < 2) throw NoNegativesError();

  const ContrastiveBatch::TurnPair& pos = batch.turns[s];
  Value anchor_z = anchor == 1 ? pos.z1 : pos.z2;
  double inv_tau = 1.0 / batch.tau;

  Value pos_term = scale(cosine_similarity(pos.z1, pos.z2), inv_tau);
  std::vector<Value> denom_terms;
  for (std::size_t t = 0; t < batch.turns.size(); ++t) {
    if (t == s) continue;
    denom_terms.push_back(exp(scale(cosine_similarity(anchor_z, batch.turns[t].z1), inv_tau)));
    denom_terms.push_back(exp(scale(cosine_similarity(anchor_z, batch.turns[t].z2), inv_tau)));
  }
  if (batch.include_positive_in_denominator) denom_terms.push_back(exp(pos_term));
  Value denom = sum(vcat(std::span<const Value>(denom_terms.data(), denom_terms.size())));
  return sub(log(denom), pos_term);
}

VideoLossResult video_loss(const ContrastiveBatch& batch, bool symmetric_anchors) {
  if (batch.turns.size() < 2) return {std::nullopt, true};
  std::vector<Value> terms;
  for (std::size_t s = 0; s < batch.turns.size(); ++s) {
    terms.push_back(infonce_turn_loss(batch, s, 1));
    if (symmetric_anchors) terms.push_back(infonce_turn_loss(batch, s, 2));
  }
  Value total = mean(vcat(std::span<const Value>(terms.data(), terms.size())));
  return {total, false};
}

void PretrainMetrics::merge(const PretrainMetrics& other) {
  loss_sum += other.loss_sum;
  videos += other.videos;
  skipped_videos += other.skipped_videos;
  pos_sim_sum += other.pos_sim_sum;
  pos_pairs += other.pos_pairs;
  neg_sim_sum += other.neg_sim_sum;
  neg_pairs += other.neg_pairs;
}

PretrainMetrics pretrain_step(std::span<const VideoRecord* const> batch, ModelParams& params,
                              AdamW& opt, const PretrainStepConfig& cfg, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");
  cfg.aug.validate();
  PretrainMetrics metrics;
  double inv_batch = 1.0 / static_cast<double>(batch.size());
  bool any_loss = false;

  for (const VideoRecord* video : batch) {
    Tape tape;
    std::vector<TurnGraph> graphs;
    if (cfg.mode == FactorMode::VideoLevel) {
      // one graph per video; the contrastive objective then has no negatives
      // (cross-video negatives are out of scope) and the video is skipped
      graphs.push_back(build_video_graph(tape, *video, params, true));
    } else {
      graphs = build_turn_graphs(tape, *video, params, true);
    }

    std::vector<TurnGraph> views1, views2;
    views1.reserve(graphs.size());
    views2.reserve(graphs.size());
    for (const TurnGraph& g : graphs) {
      AugmentedPair pair = make_views(g, cfg.aug, rng);
      views1.push_back(std::move(pair.view1));
      views2.push_back(std::move(pair.view2));
    }

    EncodeOptions opts;
    opts.mode = cfg.mode;
    opts.z_cross_links = cfg.z_cross_links;
    opts.trainable = true;
    opts.attention_dropout = cfg.attention_dropout;
    opts.rng = cfg.attention_dropout > 0.0 ? &rng : nullptr;
    std::vector<Value> z1 = encode_graphs(tape, views1, params, opts);
    std::vector<Value> z2 = encode_graphs(tape, views2, params, opts);

    ContrastiveBatch cb;
    cb.tau = cfg.tau;
    cb.include_positive_in_denominator = cfg.include_positive_in_denominator;
    for (std::size_t s = 0; s < z1.size(); ++s) cb.turns.push_back({z1[s], z2[s]});

    metrics.videos += 1;
    for (std::size_t s = 0; s < cb.turns.size(); ++s) {
      metrics.pos_sim_sum += cosine(cb.turns[s].z1.val(), cb.turns[s].z2.val());
      metrics.pos_pairs += 1;
      for (std::size_t t = 0; t < cb.turns.size(); ++t) {
        if (t == s) continue;
        for (int anchor = 0; anchor < 2; ++anchor) {
          const Matrix& az = anchor == 0 ? cb.turns[s].z1.val() : cb.turns[s].z2.val();
          metrics.neg_sim_sum += cosine(az, cb.turns[t].z1.val());
          metrics.neg_sim_sum += cosine(az, cb.turns[t].z2.val());
          metrics.neg_pairs += 2;
        }
      }
    }

    VideoLossResult result = video_loss(cb, cfg.symmetric_anchors);
    if (result.skipped) {
      metrics.skipped_videos += 1;
      tape.clear();
      continue;
    }
    metrics.loss_sum += result.loss->scalar();
    any_loss = true;
    backward(scale(*result.loss, inv_batch));
  }

  if (any_loss) opt.step();
  return metrics;
}

}  // namespace stgc
