#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stgc/data.hpp"
#include "stgc/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string checkpoint_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_data, bool need_checkpoint) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  auto* data = cmd->add_option("--data", args.data_path, "newline-delimited JSON records");
  if (need_data) data->required();
  auto* ckpt = cmd->add_option("--checkpoint", args.checkpoint_path, "checkpoint file");
  if (need_checkpoint) ckpt->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the config seed")->each([&args](const std::string&) {
    args.seed_set = true;
  });
}

stgc::TrainConfig resolve_config(const CommonArgs& args) {
  stgc::TrainConfig cfg;
  if (!args.config_path.empty()) cfg = stgc::load_config_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  cfg.validate();
  return cfg;
}

constexpr double kSweepGrid[3] = {0.25, 0.5, 0.75};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaking-turn graph contrastive learning pipeline"};
  app.require_subcommand(1);

  CommonArgs args;

  // gen-data
  stgc::SynthConfig synth;
  std::string gen_out = "data.ndjson";
  auto* gen = app.add_subcommand("gen-data", "generate synthetic multimodal videos");
  gen->add_option("--videos", synth.videos, "video count");
  gen->add_option("--turns-min", synth.turns_min, "min turns per video");
  gen->add_option("--turns-max", synth.turns_max, "max turns per video");
  gen->add_option("--nodes-min", synth.nodes_min, "min rows per modality per turn");
  gen->add_option("--nodes-max", synth.nodes_max, "max rows per modality per turn");
  gen->add_option("--dim-text", synth.d_text, "text feature dim");
  gen->add_option("--dim-vision", synth.d_vision, "vision feature dim");
  gen->add_option("--dim-acoustic", synth.d_acoustic, "acoustic feature dim");
  gen->add_option("--speakers", synth.speakers, "speakers per video");
  gen->add_option("--speaker-strength", synth.speaker_strength, "speaker bias magnitude");
  gen->add_option("--answer-strength", synth.answer_strength, "answer signal magnitude");
  gen->add_option("--noise", synth.noise, "noise scale");
  gen->add_option("--qa-per-video", synth.qa_per_video, "QA items per video");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--out", gen_out, "output file");

  auto* pretrain = app.add_subcommand("pretrain", "contrastive pretraining");
  add_common(pretrain, args, true, false);
  std::string sweep_aug;
  pretrain->add_option("--sweep-aug", sweep_aug,
                       "run the 0.25/0.5/0.75 ratio grid for one augmentation "
                       "(node_drop|edge_perturb|node_mask|subgraph)");

  auto* finetune = app.add_subcommand("finetune", "QA fine-tuning");
  add_common(finetune, args, true, false);

  auto* eval = app.add_subcommand("eval", "QA accuracy of a fine-tuned checkpoint");
  add_common(eval, args, true, true);

  auto* probe = app.add_subcommand("probe-speaker", "speaker probe on factorization nodes");
  add_common(probe, args, true, true);

  auto* edges = app.add_subcommand("analyze-edges", "edge-count reduction by turn count");
  add_common(edges, args, true, false);

  auto* attention = app.add_subcommand("analyze-attention", "cross- vs within-turn attention");
  add_common(attention, args, true, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::vector<stgc::VideoRecord> records = stgc::generate(synth);
      stgc::save_records(gen_out, records);
      std::cout << "wrote " << records.size() << " records to " << gen_out << "\n";
      return 0;
    }
    if (pretrain->parsed()) {
      stgc::TrainConfig cfg = resolve_config(args);
      if (!sweep_aug.empty()) {
        auto kind = stgc::parse_aug_kind(sweep_aug);
        if (!kind) throw std::invalid_argument("pretrain: unknown augmentation '" + sweep_aug + "'");
        for (double ratio : kSweepGrid) {
          stgc::TrainConfig grid_cfg = cfg;
          grid_cfg.aug.ratio[static_cast<std::size_t>(*kind)] = ratio;
          std::string sub = args.out_dir + "/" + sweep_aug + "_" + std::to_string(ratio).substr(0, 4);
          stgc::PretrainRunResult r = stgc::cmd_pretrain(grid_cfg, args.data_path, sub);
          std::cout << sweep_aug << " ratio " << ratio << ": final loss "
                    << r.epoch_loss.back() << ", pos-neg sim gap "
                    << r.epoch_pos_sim.back() - r.epoch_neg_sim.back() << "\n";
        }
        return 0;
      }
      stgc::PretrainRunResult r =
          stgc::cmd_pretrain(cfg, args.data_path, args.out_dir, args.checkpoint_path);
      std::cout << "pretrained " << r.epochs_run << " epoch(s); final loss "
                << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back()) << "; checkpoint "
                << r.checkpoint_path << "\n";
      return 0;
    }
    if (finetune->parsed()) {
      stgc::TrainConfig cfg = resolve_config(args);
      stgc::FinetuneRunResult r =
          stgc::cmd_finetune(cfg, args.data_path, args.out_dir, args.checkpoint_path);
      std::printf("max validation accuracy %.4f (epoch %d); checkpoint %s\n", r.max_val_accuracy,
                  r.best_epoch, r.checkpoint_path.c_str());
      return 0;
    }
    if (eval->parsed()) {
      stgc::EvalResult r = stgc::cmd_eval(args.data_path, args.checkpoint_path);
      std::printf("validation accuracy %.4f (%lld items)\n", r.val_accuracy,
                  static_cast<long long>(r.val_items));
      std::printf("overall accuracy    %.4f (%lld items)\n", r.overall_accuracy,
                  static_cast<long long>(r.total_items));
      return 0;
    }
    if (probe->parsed()) {
      stgc::TrainConfig cfg = resolve_config(args);
      stgc::ProbeResult r =
          stgc::cmd_probe_speaker(cfg, args.data_path, args.checkpoint_path, args.out_dir);
      std::printf("probe validation accuracy %.4f (best epoch %d; %zu train / %zu val pairs)\n",
                  r.best_val_accuracy, r.best_epoch, r.train_pairs, r.val_pairs);
      return 0;
    }
    if (edges->parsed()) {
      std::vector<stgc::EdgeAnalysisRow> rows = stgc::cmd_analyze_edges(args.data_path, args.out_dir);
      std::printf("%-8s %-8s %s\n", "turns", "videos", "mean edge reduction");
      for (const auto& row : rows)
        std::printf("%-8s %-8d %.4f%%\n", row.bucket.c_str(), row.videos, 100.0 * row.mean_reduction);
      return 0;
    }
    if (attention->parsed()) {
      stgc::AttentionAnalysis r =
          stgc::cmd_analyze_attention(args.data_path, args.checkpoint_path, args.out_dir);
      std::printf("within-turn mean attention %.6f over %lld pairs\n", r.within_mean, r.within_count);
      std::printf("cross-turn mean attention  %.6f over %lld pairs\n", r.cross_mean, r.cross_count);
      std::printf("cross-turn attention is %+.2f%% relative to within-turn\n", r.percent_higher);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
