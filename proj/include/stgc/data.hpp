#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgc/graph.hpp"
#include "stgc/init.hpp"

namespace stgc {

/// Synthetic multimodal videos with planted speaker and answer structure.
/// Every speaker carries a persistent per-modality bias vector of magnitude
/// speaker_strength; turn features are bias + noise. Questions and correct
/// answers follow the chosen turn's speaker direction scaled by
/// answer_strength; incorrect answers follow a different speaker's direction.
struct SynthConfig {
  int videos = 64;
  int turns_min = 2;
  int turns_max = 6;
  int nodes_min = 1;  // rows per modality per turn
  int nodes_max = 4;
  int d_text = 10;
  int d_vision = 12;
  int d_acoustic = 8;
  int speakers = 2;  // per video
  double speaker_strength = 2.0;
  double answer_strength = 2.0;
  double noise = 1.0;
  int qa_per_video = 2;
  int question_len_min = 2;
  int question_len_max = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<VideoRecord> generate(const SynthConfig& cfg);

/// Newline-delimited JSON, one video per line:
///   {"video_id":..., "turns":[{"speaker_id":...,"text":[[...]],...}], "qa":[...]}
/// Floats round-trip exactly.
void save_records(const std::string& path, const std::vector<VideoRecord>& records);

/// Parses and validates; malformed input reports the 1-based line number, and
/// inconsistent feature dims report the modality and expected dim. An empty
/// file yields an empty list.
std::vector<VideoRecord> load_records(const std::string& path);

}  // namespace stgc
