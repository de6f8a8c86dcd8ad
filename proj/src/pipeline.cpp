#include "stgc/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace stgc {

namespace {
constexpr std::uint64_t kPretrainStreamSalt = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kFinetuneStreamSalt = 0xD1B54A32D192ED03ull;
constexpr std::uint64_t kProbeStreamSalt = 0x94D049BB133111EBull;
}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

SplitIndices split_by_hash(const std::vector<VideoRecord>& records) {
  SplitIndices split;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (fnv1a64(records[i].video_id) % 5 == 0) {
      split.val.push_back(i);
    } else {
      split.train.push_back(i);
    }
  }
  return split;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error("metrics: cannot open '" + path + "' for writing");
}

void MetricsWriter::write(int epoch, const std::string& key, double value) {
  nlohmann::json j = {{"epoch", epoch}, {"key", key}, {"value", value}};
  out_ << j.dump() << "\n";
  out_.flush();
}

DataDims infer_dims(const std::vector<VideoRecord>& records) {
  DataDims dims;
  bool seen[4] = {false, false, false, false};
  for (const VideoRecord& v : records) {
    for (const Turn& t : v.turns)
      for (int m = 0; m < kModalityCount; ++m) {
        const Matrix& f = t.features(static_cast<Modality>(m));
        if (f.rows() == 0 || seen[m]) continue;
        seen[m] = true;
        (m == 0 ? dims.d_text : m == 1 ? dims.d_vision : dims.d_acoustic) = static_cast<int>(f.cols());
      }
    for (const QAItem& q : v.qa_items) {
      if (!seen[3] && q.question.rows() > 0) {
        dims.d_q = static_cast<int>(q.question.cols());
        seen[3] = true;
      }
    }
  }
  return dims;
}

namespace {

std::vector<VideoRecord> load_nonempty(const std::string& data_path, const char* who) {
  std::vector<VideoRecord> records = load_records(data_path);
  if (records.empty())
    throw std::runtime_error(std::string(who) + ": no records in '" + data_path + "'");
  return records;
}

ModelDims model_dims(const TrainConfig& cfg, const DataDims& dd) {
  ModelDims md;
  md.d = cfg.hidden_dim;
  md.d_text = dd.d_text;
  md.d_vision = dd.d_vision;
  md.d_acoustic = dd.d_acoustic;
  md.heads = cfg.heads;
  md.layers = cfg.layers;
  return md;
}

void check_dims_match(const Checkpoint& ckpt, const DataDims& dd) {
  if (ckpt.d_text != dd.d_text || ckpt.d_vision != dd.d_vision || ckpt.d_acoustic != dd.d_acoustic)
    throw std::runtime_error(
        "checkpoint: data feature dims (" + std::to_string(dd.d_text) + "," +
        std::to_string(dd.d_vision) + "," + std::to_string(dd.d_acoustic) +
        ") do not match the checkpoint (" + std::to_string(ckpt.d_text) + "," +
        std::to_string(ckpt.d_vision) + "," + std::to_string(ckpt.d_acoustic) + ")");
}

std::vector<Parameter*> param_ptrs(const NamedParams& named) {
  std::vector<Parameter*> out;
  out.reserve(named.size());
  for (const auto& [name, p] : named) out.push_back(p);
  return out;
}

void ensure_out_dir(const std::string& out_dir) { std::filesystem::create_directories(out_dir); }

std::vector<const VideoRecord*> select(const std::vector<VideoRecord>& records,
                                       const std::vector<std::size_t>& idx) {
  std::vector<const VideoRecord*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&records[i]);
  return out;
}

}  // namespace

PretrainRunResult cmd_pretrain(const TrainConfig& cfg_in, const std::string& data_path,
                               const std::string& out_dir, const std::string& resume_checkpoint) {
  cfg_in.validate();
  std::vector<VideoRecord> records = load_nonempty(data_path, "pretrain");
  DataDims dd = infer_dims(records);
  SplitIndices split = split_by_hash(records);
  if (split.train.empty()) throw std::runtime_error("pretrain: train split is empty");
  ensure_out_dir(out_dir);

  TrainConfig cfg = cfg_in;
  bool resuming = !resume_checkpoint.empty();
  int start_epoch = 0;
  Checkpoint loaded;
  if (resuming) {
    loaded = load_checkpoint(resume_checkpoint);
    if (loaded.phase != "pretrain")
      throw std::runtime_error("pretrain: checkpoint '" + resume_checkpoint +
                               "' is not a pretraining checkpoint");
    check_dims_match(loaded, dd);
    cfg = TrainConfig::from_kv(loaded.config_kv);
    cfg.max_epochs = cfg_in.max_epochs;  // allow extending the run
    cfg.validate();
    start_epoch = static_cast<int>(loaded.epoch);
  }
  if (cfg.aug.enabled_count() == 0)
    throw std::invalid_argument(
        "config: key 'aug.enabled': pretraining needs at least one augmentation enabled");

  Rng init_rng(cfg.seed);
  ModelParams params = ModelParams::init(model_dims(cfg, dd), init_rng);
  NamedParams named = params.named_params();
  AdamW opt(param_ptrs(named), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng train_rng(cfg.seed ^ kPretrainStreamSalt);
  if (resuming) {
    restore_tensors(loaded, named);
    restore_optimizer(loaded, opt, named);
    train_rng = rng_from_string(loaded.rng_state);
  }

  PretrainStepConfig scfg;
  scfg.aug = cfg.aug;
  scfg.tau = cfg.tau;
  scfg.include_positive_in_denominator = cfg.include_positive_in_denominator;
  scfg.symmetric_anchors = cfg.symmetric_anchors;
  scfg.z_cross_links = cfg.z_cross_links;
  scfg.mode = cfg.factor_mode;
  scfg.attention_dropout = cfg.attention_dropout;

  MetricsWriter metrics(out_dir + "/metrics.ndjson", resuming);
  std::string ckpt_path = out_dir + "/checkpoint.bin";
  PretrainRunResult result;
  result.checkpoint_path = ckpt_path;

  for (int epoch = start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    std::shuffle(order.begin(), order.end(), train_rng);
    PretrainMetrics epoch_metrics;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const VideoRecord*> batch;
      for (std::size_t i = at; i < end; ++i) batch.push_back(&records[order[i]]);
      epoch_metrics.merge(pretrain_step(batch, params, opt, scfg, train_rng));
    }
    metrics.write(epoch, "pretrain.loss", epoch_metrics.mean_loss());
    metrics.write(epoch, "pretrain.pos_sim", epoch_metrics.mean_pos_sim());
    metrics.write(epoch, "pretrain.neg_sim", epoch_metrics.mean_neg_sim());
    metrics.write(epoch, "pretrain.skipped_videos", epoch_metrics.skipped_videos);
    result.epoch_numbers.push_back(epoch);
    result.epoch_loss.push_back(epoch_metrics.mean_loss());
    result.epoch_pos_sim.push_back(epoch_metrics.mean_pos_sim());
    result.epoch_neg_sim.push_back(epoch_metrics.mean_neg_sim());
    result.skipped_videos_last_epoch = epoch_metrics.skipped_videos;
    result.epochs_run += 1;

    Checkpoint ckpt;
    ckpt.phase = "pretrain";
    ckpt.config_kv = cfg.to_kv();
    ckpt.epoch = epoch;
    ckpt.rng_state = rng_to_string(train_rng);
    ckpt.d_text = dd.d_text;
    ckpt.d_vision = dd.d_vision;
    ckpt.d_acoustic = dd.d_acoustic;
    ckpt.d_q = dd.d_q;
    collect_tensors(ckpt, named);
    collect_optimizer(ckpt, opt, named);
    save_checkpoint(ckpt_path, ckpt);
  }
  return result;
}

FinetuneRunResult cmd_finetune(const TrainConfig& cfg, const std::string& data_path,
                               const std::string& out_dir, const std::string& encoder_checkpoint) {
  cfg.validate();
  std::vector<VideoRecord> records = load_nonempty(data_path, "finetune");
  DataDims dd = infer_dims(records);
  SplitIndices split = split_by_hash(records);
  ensure_out_dir(out_dir);

  long long train_items = 0, val_items = 0;
  for (std::size_t i : split.train) train_items += static_cast<long long>(records[i].qa_items.size());
  for (std::size_t i : split.val) val_items += static_cast<long long>(records[i].qa_items.size());
  if (train_items == 0) throw std::runtime_error("finetune: no QA items in the train split");
  if (val_items == 0) throw std::runtime_error("finetune: no QA items in the validation split");

  bool frozen = cfg.finetune_mode == FinetuneMode::Frozen;
  Rng init_rng(cfg.seed);
  TrainConfig enc_cfg = cfg;
  Checkpoint enc_ckpt;
  if (frozen) {
    if (encoder_checkpoint.empty())
      throw std::runtime_error("finetune: frozen mode requires a pretraining checkpoint (--checkpoint)");
    enc_ckpt = load_checkpoint(encoder_checkpoint);
    if (enc_ckpt.phase != "pretrain")
      throw std::runtime_error("finetune: '" + encoder_checkpoint + "' is not a pretraining checkpoint");
    check_dims_match(enc_ckpt, dd);
    enc_cfg = TrainConfig::from_kv(enc_ckpt.config_kv);
  }
  ModelParams encoder = ModelParams::init(model_dims(enc_cfg, dd), init_rng);
  if (frozen) restore_tensors(enc_ckpt, encoder.named_params());

  int d = enc_cfg.hidden_dim;
  if (d % cfg.heads != 0)
    throw std::invalid_argument("config: key 'heads': encoder dim " + std::to_string(d) +
                                " not divisible by " + std::to_string(cfg.heads));
  QAHeadParams head = QAHeadParams::init(d, dd.d_q, cfg.heads, cfg.layers, init_rng);

  NamedParams trainable = head.named_params();
  if (!frozen) {
    NamedParams enc_named = encoder.named_params();
    trainable.insert(trainable.end(), enc_named.begin(), enc_named.end());
  }
  AdamW opt(param_ptrs(trainable), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng train_rng(cfg.seed ^ kFinetuneStreamSalt);

  QAForwardOptions fwd;
  fwd.scope = cfg.graph_scope;
  fwd.trainable_encoder = !frozen;
  fwd.z_cross_links = enc_cfg.z_cross_links;
  fwd.max_seq_len = cfg.max_seq_len;

  FinetuneRunResult result;
  result.encoder_hash_before = params_hash(encoder.named_params());
  std::vector<const VideoRecord*> val_videos = select(records, split.val);

  MetricsWriter metrics(out_dir + "/finetune_metrics.ndjson", false);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // fresh answer positions every epoch
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<ItemRef> refs;
    for (std::size_t i : split.train)
      for (std::size_t q = 0; q < records[i].qa_items.size(); ++q) {
        records[i].qa_items[q].correct_position = coin(train_rng);
        refs.push_back({&records[i], static_cast<int>(q)});
      }
    std::shuffle(refs.begin(), refs.end(), train_rng);

    double loss_sum = 0.0;
    for (std::size_t at = 0; at < refs.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(refs.size(), at + static_cast<std::size_t>(cfg.batch_size));
      std::span<const ItemRef> batch(refs.data() + at, end - at);
      loss_sum += finetune_step(batch, encoder, head, opt, fwd) * static_cast<double>(batch.size());
    }
    double mean_loss = loss_sum / static_cast<double>(refs.size());
    double val_acc = evaluate_accuracy(val_videos, encoder, head, fwd);
    metrics.write(epoch, "finetune.loss", mean_loss);
    metrics.write(epoch, "finetune.val_accuracy", val_acc);
    result.epoch_loss.push_back(mean_loss);
    result.epoch_val_accuracy.push_back(val_acc);
    if (val_acc > result.max_val_accuracy) {
      result.max_val_accuracy = val_acc;
      result.best_epoch = epoch;
    }
  }
  metrics.write(result.best_epoch, "finetune.max_val_accuracy", result.max_val_accuracy);
  result.encoder_hash_after = params_hash(encoder.named_params());

  Checkpoint ckpt;
  ckpt.phase = "finetune";
  ckpt.config_kv = cfg.to_kv();
  ckpt.epoch = cfg.max_epochs;
  ckpt.rng_state = rng_to_string(train_rng);
  ckpt.d_text = dd.d_text;
  ckpt.d_vision = dd.d_vision;
  ckpt.d_acoustic = dd.d_acoustic;
  ckpt.d_q = dd.d_q;
  collect_tensors(ckpt, encoder.named_params());
  collect_tensors(ckpt, head.named_params());
  result.checkpoint_path = out_dir + "/finetune_checkpoint.bin";
  save_checkpoint(result.checkpoint_path, ckpt);
  return result;
}

EvalResult cmd_eval(const std::string& data_path, const std::string& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.phase != "finetune")
    throw std::runtime_error("eval: '" + checkpoint_path + "' is not a fine-tuning checkpoint");
  TrainConfig cfg = TrainConfig::from_kv(ckpt.config_kv);
  std::vector<VideoRecord> records = load_nonempty(data_path, "eval");
  DataDims dd = infer_dims(records);
  check_dims_match(ckpt, dd);
  if (ckpt.d_q != dd.d_q)
    throw std::runtime_error("eval: QA dim " + std::to_string(dd.d_q) +
                             " does not match the checkpoint (" + std::to_string(ckpt.d_q) + ")");

  Rng init_rng(cfg.seed);
  ModelParams encoder = ModelParams::init(model_dims(cfg, dd), init_rng);
  QAHeadParams head = QAHeadParams::init(cfg.hidden_dim, dd.d_q, cfg.heads, cfg.layers, init_rng);
  restore_tensors(ckpt, encoder.named_params());
  restore_tensors(ckpt, head.named_params());

  QAForwardOptions fwd;
  fwd.scope = cfg.graph_scope;
  fwd.trainable_encoder = false;
  fwd.z_cross_links = cfg.z_cross_links;
  fwd.max_seq_len = cfg.max_seq_len;

  SplitIndices split = split_by_hash(records);
  EvalResult result;
  for (const VideoRecord& v : records) result.total_items += static_cast<long long>(v.qa_items.size());
  for (std::size_t i : split.val) result.val_items += static_cast<long long>(records[i].qa_items.size());
  std::vector<const VideoRecord*> all;
  for (const VideoRecord& v : records) all.push_back(&v);
  result.overall_accuracy = evaluate_accuracy(all, encoder, head, fwd);
  if (result.val_items > 0) {
    std::vector<const VideoRecord*> val_videos = select(records, split.val);
    result.val_accuracy = evaluate_accuracy(val_videos, encoder, head, fwd);
  }
  return result;
}

ProbeResult cmd_probe_speaker(const TrainConfig& cfg, const std::string& data_path,
                              const std::string& checkpoint_path, const std::string& out_dir) {
  cfg.validate();
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.phase != "pretrain")
    throw std::runtime_error("probe: '" + checkpoint_path + "' is not a pretraining checkpoint");
  TrainConfig enc_cfg = TrainConfig::from_kv(ckpt.config_kv);
  if (enc_cfg.factor_mode != FactorMode::Factorized)
    throw std::runtime_error("probe: checkpoint must come from a factorized-mode run, got " +
                             std::string(factor_mode_name(enc_cfg.factor_mode)));
  std::vector<VideoRecord> records = load_nonempty(data_path, "probe");
  DataDims dd = infer_dims(records);
  check_dims_match(ckpt, dd);
  ensure_out_dir(out_dir);

  Rng init_rng(enc_cfg.seed);
  ModelParams encoder = ModelParams::init(model_dims(enc_cfg, dd), init_rng);
  restore_tensors(ckpt, encoder.named_params());

  // factor vectors per (video, turn), no augmentation
  EncodeOptions enc_opts;
  enc_opts.mode = FactorMode::Factorized;
  enc_opts.z_cross_links = enc_cfg.z_cross_links;
  enc_opts.trainable = false;
  struct PairSample {
    Matrix x;  // [2d x 1]
    double label;
    std::uint64_t video_hash;
  };
  std::vector<PairSample> samples;
  for (const VideoRecord& video : records) {
    Tape tape;
    std::vector<Value> zs = encode_video(tape, video, encoder, enc_opts);
    // first speaker with two turns plus a turn from someone else
    int a1 = -1, a2 = -1, b1 = -1;
    for (std::size_t i = 0; i < video.turns.size() && a2 == -1; ++i) {
      for (std::size_t j = i + 1; j < video.turns.size(); ++j)
        if (video.turns[j].speaker_id == video.turns[i].speaker_id) {
          a1 = static_cast<int>(i);
          a2 = static_cast<int>(j);
          break;
        }
    }
    if (a2 == -1) continue;
    for (std::size_t j = 0; j < video.turns.size(); ++j)
      if (video.turns[j].speaker_id != video.turns[static_cast<std::size_t>(a1)].speaker_id) {
        b1 = static_cast<int>(j);
        break;
      }
    if (b1 == -1) continue;
    Matrix za1 = zs[static_cast<std::size_t>(a1)].val();
    Matrix za2 = zs[static_cast<std::size_t>(a2)].val();
    Matrix zb1 = zs[static_cast<std::size_t>(b1)].val();
    Matrix same(za1.rows() * 2, 1), diff(za1.rows() * 2, 1);
    same << za1, za2;
    diff << za1, zb1;
    std::uint64_t h = fnv1a64(video.video_id);
    samples.push_back({std::move(same), 1.0, h});
    samples.push_back({std::move(diff), 0.0, h});
  }
  if (samples.empty())
    throw std::runtime_error("probe: no qualifying videos (need two turns of one speaker and one of another)");

  std::vector<const PairSample*> train, val;
  for (const PairSample& s : samples)
    (s.video_hash % 5 == 0 ? val : train).push_back(&s);
  if (train.empty() || val.empty())
    throw std::runtime_error("probe: train or validation pair set is empty");

  int d = enc_cfg.hidden_dim;
  Rng probe_rng(cfg.seed ^ kProbeStreamSalt);
  Parameter w1 = glorot_param(d, 2 * d, probe_rng);
  Parameter b1p = zero_param(d, 1);
  Parameter w2 = glorot_param(1, d, probe_rng);
  Parameter b2p = zero_param(1, 1);
  AdamW opt({&w1, &b1p, &w2, &b2p}, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  auto forward = [&](Tape& tape, const PairSample& s, bool train_mode) {
    Value x = constant(tape, s.x);
    Value hidden = relu(add(matmul(train_mode ? leaf(tape, w1) : constant(tape, w1.value), x),
                            train_mode ? leaf(tape, b1p) : constant(tape, b1p.value)));
    if (train_mode && cfg.probe_dropout > 0.0) hidden = dropout(hidden, cfg.probe_dropout, probe_rng);
    return sigmoid(add(matmul(train_mode ? leaf(tape, w2) : constant(tape, w2.value), hidden),
                       train_mode ? leaf(tape, b2p) : constant(tape, b2p.value)));
  };

  MetricsWriter metrics(out_dir + "/probe_metrics.ndjson", false);
  ProbeResult result;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  result.train_pairs = train.size();
  result.val_pairs = val.size();

  const std::size_t probe_batch = 64;
  for (int epoch = 1; epoch <= cfg.probe_max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), probe_rng);
    double train_loss = 0.0;
    for (std::size_t at = 0; at < train.size(); at += probe_batch) {
      std::size_t end = std::min(train.size(), at + probe_batch);
      Tape tape;
      std::vector<Value> losses;
      losses.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) {
        Value score = forward(tape, *train[i], true);
        losses.push_back(mse(score, constant(tape, Matrix::Constant(1, 1, train[i]->label))));
      }
      Value total = mean(vcat(std::span<const Value>(losses.data(), losses.size())));
      train_loss += total.scalar() * static_cast<double>(end - at);
      backward(total);
      opt.step();
    }
    train_loss /= static_cast<double>(train.size());

    double val_loss = 0.0;
    long long correct = 0;
    {
      Tape vtape;
      for (const PairSample* s : val) {
        Value score = forward(vtape, *s, false);
        double sv = score.scalar();
        val_loss += (sv - s->label) * (sv - s->label);
        if ((sv > 0.5) == (s->label > 0.5)) ++correct;
      }
    }
    val_loss /= static_cast<double>(val.size());
    double val_acc = static_cast<double>(correct) / static_cast<double>(val.size());
    metrics.write(epoch, "probe.train_loss", train_loss);
    metrics.write(epoch, "probe.val_loss", val_loss);
    metrics.write(epoch, "probe.val_accuracy", val_acc);
    result.epochs_run = epoch;

    if (val_loss < best_val_loss - 1e-12) {
      best_val_loss = val_loss;
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.probe_patience) {
      break;  // early stopping
    }
  }
  metrics.write(result.best_epoch, "probe.best_val_accuracy", result.best_val_accuracy);
  return result;
}

std::vector<EdgeAnalysisRow> cmd_analyze_edges(const std::string& data_path,
                                               const std::string& out_dir) {
  std::vector<VideoRecord> records = load_nonempty(data_path, "analyze-edges");
  ensure_out_dir(out_dir);
  std::map<int, std::pair<int, double>> buckets;  // S (capped at 6) -> (count, sum reduction)
  for (const VideoRecord& v : records) {
    std::vector<int> sizes;
    for (const Turn& t : v.turns) sizes.push_back(static_cast<int>(t.node_count()));
    long long full = count_edges(sizes, EdgeCountMode::VideoLevel);
    long long fact = count_edges(sizes, EdgeCountMode::Factorized);
    double reduction = full > 0 ? static_cast<double>(full - fact) / static_cast<double>(full) : 0.0;
    int key = std::min<int>(6, static_cast<int>(v.turns.size()));
    auto& slot = buckets[key];
    slot.first += 1;
    slot.second += reduction;
  }
  MetricsWriter metrics(out_dir + "/edges_metrics.ndjson", false);
  std::vector<EdgeAnalysisRow> rows;
  for (const auto& [key, slot] : buckets) {
    EdgeAnalysisRow row;
    row.bucket = key >= 6 ? ">=6" : std::to_string(key);
    row.videos = slot.first;
    row.mean_reduction = slot.second / slot.first;
    metrics.write(0, "edges.reduction." + row.bucket, row.mean_reduction);
    metrics.write(0, "edges.videos." + row.bucket, row.videos);
    rows.push_back(std::move(row));
  }
  return rows;
}

AttentionAnalysis cmd_analyze_attention(const std::string& data_path,
                                        const std::string& checkpoint_path,
                                        const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.phase != "pretrain")
    throw std::runtime_error("analyze-attention: '" + checkpoint_path +
                             "' is not a pretraining checkpoint");
  TrainConfig enc_cfg = TrainConfig::from_kv(ckpt.config_kv);
  if (enc_cfg.factor_mode != FactorMode::VideoLevel)
    throw std::runtime_error("analyze-attention: checkpoint must come from a video_level run, got " +
                             std::string(factor_mode_name(enc_cfg.factor_mode)));
  std::vector<VideoRecord> records = load_nonempty(data_path, "analyze-attention");
  DataDims dd = infer_dims(records);
  check_dims_match(ckpt, dd);
  ensure_out_dir(out_dir);

  Rng init_rng(enc_cfg.seed);
  ModelParams encoder = ModelParams::init(model_dims(enc_cfg, dd), init_rng);
  restore_tensors(ckpt, encoder.named_params());

  AttentionAnalysis result;
  double within_sum = 0.0, cross_sum = 0.0;
  bool any_multi_turn = false;
  for (const VideoRecord& video : records) {
    if (video.turns.size() < 2) continue;
    any_multi_turn = true;
    Tape tape;
    AttentionProbe probe;
    EncodeOptions opts;
    opts.mode = FactorMode::VideoLevel;
    opts.trainable = false;
    opts.probe = &probe;
    std::vector<TurnGraph> graphs{build_video_graph(tape, video, encoder, false)};
    encode_graphs(tape, graphs, encoder, opts);
    for (const AttentionProbe::Entry& e : probe.entries) {
      if (e.anchor_is_factor || e.neighbor_is_factor) continue;
      if (e.anchor_turn == e.neighbor_turn) {
        within_sum += e.alpha;
        result.within_count += 1;
      } else {
        cross_sum += e.alpha;
        result.cross_count += 1;
      }
    }
  }
  if (!any_multi_turn)
    throw std::runtime_error("analyze-attention: data has no multi-turn videos");
  if (result.within_count == 0 || result.cross_count == 0)
    throw std::runtime_error("analyze-attention: missing within- or cross-turn pairs");
  result.within_mean = within_sum / static_cast<double>(result.within_count);
  result.cross_mean = cross_sum / static_cast<double>(result.cross_count);
  result.percent_higher = (result.cross_mean / result.within_mean - 1.0) * 100.0;

  MetricsWriter metrics(out_dir + "/attention_metrics.ndjson", false);
  metrics.write(0, "attention.within_mean", result.within_mean);
  metrics.write(0, "attention.cross_mean", result.cross_mean);
  metrics.write(0, "attention.percent_higher", result.percent_higher);
  return result;
}

}  // namespace stgc
