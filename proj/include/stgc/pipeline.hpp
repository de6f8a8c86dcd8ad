#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "stgc/checkpoint.hpp"
#include "stgc/config.hpp"
#include "stgc/contrastive.hpp"
#include "stgc/data.hpp"
#include "stgc/qa.hpp"

namespace stgc {

std::uint64_t fnv1a64(std::string_view s);

/// Deterministic 80/20 train/validation split by video-id hash.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
SplitIndices split_by_hash(const std::vector<VideoRecord>& records);

/// Newline-delimited {"epoch":..,"key":..,"value":..} records.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, bool append);
  void write(int epoch, const std::string& key, double value);

 private:
  std::ofstream out_;
};

struct DataDims {
  int d_text = 1;
  int d_vision = 1;
  int d_acoustic = 1;
  int d_q = 1;
};
DataDims infer_dims(const std::vector<VideoRecord>& records);

struct PretrainRunResult {
  std::string checkpoint_path;
  int epochs_run = 0;
  std::vector<int> epoch_numbers;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_pos_sim;
  std::vector<double> epoch_neg_sim;
  int skipped_videos_last_epoch = 0;
};

/// Contrastive pretraining on the train split; per-epoch metrics and a resume
/// checkpoint land in out_dir. Passing resume_checkpoint continues that run
/// bit-identically (its config is reused except for max_epochs).
PretrainRunResult cmd_pretrain(const TrainConfig& cfg, const std::string& data_path,
                               const std::string& out_dir,
                               const std::string& resume_checkpoint = {});

struct FinetuneRunResult {
  double max_val_accuracy = 0.0;
  int best_epoch = 0;
  std::uint64_t encoder_hash_before = 0;
  std::uint64_t encoder_hash_after = 0;
  std::string checkpoint_path;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_val_accuracy;
};

/// QA fine-tuning. Frozen mode requires a pretraining checkpoint and never
/// touches encoder parameters; supervised_scratch trains everything from
/// fresh initialization.
FinetuneRunResult cmd_finetune(const TrainConfig& cfg, const std::string& data_path,
                               const std::string& out_dir,
                               const std::string& encoder_checkpoint = {});

struct EvalResult {
  double val_accuracy = 0.0;
  double overall_accuracy = 0.0;
  long long val_items = 0;
  long long total_items = 0;
};
EvalResult cmd_eval(const std::string& data_path, const std::string& checkpoint_path);

struct ProbeResult {
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::size_t train_pairs = 0;
  std::size_t val_pairs = 0;
};

/// Speaker probe on factorization nodes: for each video with two turns of one
/// speaker and a turn of another, adds ([z_a1 || z_a2], 1) and
/// ([z_a1 || z_b1], 0); trains a two-layer MLP (ReLU, dropout, sigmoid, MSE)
/// with early stopping and reports validation accuracy at the best epoch.
ProbeResult cmd_probe_speaker(const TrainConfig& cfg, const std::string& data_path,
                              const std::string& checkpoint_path, const std::string& out_dir);

struct EdgeAnalysisRow {
  std::string bucket;
  int videos = 0;
  double mean_reduction = 0.0;  // (video_level - factorized) / video_level
};
std::vector<EdgeAnalysisRow> cmd_analyze_edges(const std::string& data_path,
                                               const std::string& out_dir);

struct AttentionAnalysis {
  double within_mean = 0.0;
  double cross_mean = 0.0;
  double percent_higher = 0.0;  // cross vs within, signed
  long long within_count = 0;
  long long cross_count = 0;
};

/// Mean normalized attention over cross-turn vs within-turn modality node
/// pairs of the fully connected (video-level) model.
AttentionAnalysis cmd_analyze_attention(const std::string& data_path,
                                        const std::string& checkpoint_path,
                                        const std::string& out_dir);

}  // namespace stgc
