#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stgc/augment.hpp"
#include "stgc/model.hpp"
#include "stgc/optim.hpp"

namespace stgc {

/// Raised when a turn has no negatives (fewer than two turns in the video).
struct NoNegativesError : std::runtime_error {
  NoNegativesError() : std::runtime_error("infonce_turn_loss: need at least 2 turns for negatives") {}
};

/// Factor vectors of the two augmented views of every turn of one video.
struct ContrastiveBatch {
  struct TurnPair {
    Value z1;
    Value z2;
  };
  std::vector<TurnPair> turns;
  double tau = 0.5;
  bool include_positive_in_denominator = false;
};

/// -log[ exp(sim(z^s_1, z^s_2)/tau) / sum_{s' != s} sum_{i in {1,2}}
/// exp(sim(z^s_anchor, z^{s'}_i)/tau) ] with sim = cosine similarity. As
/// printed the denominator excludes the positive term, so the loss can go
/// negative once the positive dominates; include_positive_in_denominator
/// switches to the standard normalized form (bounded below by 0).
Value infonce_turn_loss(const ContrastiveBatch& batch, std::size_t s, int anchor);

struct VideoLossResult {
  std::optional<Value> loss;  // empty when the video was skipped
  bool skipped = false;
};

/// Mean of infonce_turn_loss over all turns (and both anchors when
/// symmetric). Videos with a single turn are skipped and contribute zero.
VideoLossResult video_loss(const ContrastiveBatch& batch, bool symmetric_anchors = true);

struct PretrainStepConfig {
  AugmentationConfig aug;
  double tau = 0.5;
  bool include_positive_in_denominator = false;
  bool symmetric_anchors = true;
  bool z_cross_links = true;
  FactorMode mode = FactorMode::Factorized;
  double attention_dropout = 0.0;
};

struct PretrainMetrics {
  double loss_sum = 0.0;  // over videos; skipped videos contribute 0
  int videos = 0;
  int skipped_videos = 0;
  double pos_sim_sum = 0.0;
  long long pos_pairs = 0;
  double neg_sim_sum = 0.0;
  long long neg_pairs = 0;

  double mean_loss() const { return videos > 0 ? loss_sum / videos : 0.0; }
  double mean_pos_sim() const { return pos_pairs > 0 ? pos_sim_sum / static_cast<double>(pos_pairs) : 0.0; }
  double mean_neg_sim() const { return neg_pairs > 0 ? neg_sim_sum / static_cast<double>(neg_pairs) : 0.0; }
  void merge(const PretrainMetrics& other);
};

/// One optimizer step on a batch of videos: build turn graphs, create two
/// augmented views per turn, encode each view set, average the per-video
/// losses, backprop, AdamW update. Negatives never cross videos.
PretrainMetrics pretrain_step(std::span<const VideoRecord* const> batch, ModelParams& params,
                              AdamW& opt, const PretrainStepConfig& cfg, Rng& rng);

/// Plain cosine similarity of two column vectors (metrics helper).
double cosine(const Matrix& a, const Matrix& b);

}  // namespace stgc
