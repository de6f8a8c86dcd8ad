#include "stgc/data.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace stgc {

using nlohmann::json;

void SynthConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("synth: " + msg);
  };
  need(videos >= 1, "videos must be >= 1");
  need(turns_min >= 1 && turns_max >= turns_min, "turn count range invalid");
  need(nodes_min >= 0 && nodes_max >= nodes_min && nodes_max >= 1, "node count range invalid");
  need(d_text >= 1 && d_vision >= 1 && d_acoustic >= 1, "feature dims must be >= 1");
  need(speakers >= 1, "speakers must be >= 1");
  need(speaker_strength >= 0.0, "speaker_strength must be >= 0");
  need(answer_strength >= 0.0, "answer_strength must be >= 0");
  need(noise >= 0.0, "noise must be >= 0");
  need(qa_per_video >= 0, "qa_per_video must be >= 0");
  need(question_len_min >= 1 && question_len_max >= question_len_min, "question length range invalid");
}

namespace {

Matrix unit_direction(int dim, Rng& rng) {
  Matrix g = gaussian(dim, 1, rng);
  double n = g.norm();
  return n > 0.0 ? Matrix(g / n) : g;
}

Matrix rows_around(const Matrix& center /*[d x 1]*/, int rows, double noise, Rng& rng) {
  Matrix out(rows, center.rows());
  for (int r = 0; r < rows; ++r)
    out.row(r) = center.transpose() + noise * gaussian(center.rows(), 1, rng).transpose();
  return out;
}

}  // namespace

std::vector<VideoRecord> generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<VideoRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.videos));

  const int dims[3] = {cfg.d_text, cfg.d_vision, cfg.d_acoustic};

  for (int vi = 0; vi < cfg.videos; ++vi) {
    VideoRecord video;
    video.video_id = "video_" + std::to_string(vi);

    // persistent per-speaker bias per modality, plus a unit direction reused
    // by that speaker's questions and answers
    std::vector<std::array<Matrix, 3>> bias(static_cast<std::size_t>(cfg.speakers));
    std::vector<Matrix> answer_dir(static_cast<std::size_t>(cfg.speakers));
    for (int s = 0; s < cfg.speakers; ++s) {
      for (int m = 0; m < 3; ++m)
        bias[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)] =
            cfg.speaker_strength * unit_direction(dims[m], rng);
      const Matrix& text_bias = bias[static_cast<std::size_t>(s)][0];
      double n = text_bias.norm();
      answer_dir[static_cast<std::size_t>(s)] =
          n > 0.0 ? Matrix(text_bias / n) : Matrix(Matrix::Zero(cfg.d_text, 1));
    }

    std::uniform_int_distribution<int> turn_count_dist(cfg.turns_min, cfg.turns_max);
    std::uniform_int_distribution<int> node_count_dist(cfg.nodes_min, cfg.nodes_max);
    std::uniform_int_distribution<int> speaker_dist(0, cfg.speakers - 1);

    int turn_count = turn_count_dist(rng);
    std::vector<int> turn_speaker(static_cast<std::size_t>(turn_count));
    for (int t = 0; t < turn_count; ++t) {
      int spk = speaker_dist(rng);
      turn_speaker[static_cast<std::size_t>(t)] = spk;
      Turn turn;
      turn.speaker_id = "spk" + std::to_string(spk);
      int counts[3];
      for (int m = 0; m < 3; ++m) counts[m] = node_count_dist(rng);
      if (counts[0] + counts[1] + counts[2] == 0) counts[0] = 1;  // keep turns nonempty
      for (int m = 0; m < 3; ++m) {
        Matrix f(counts[m], dims[m]);
        if (counts[m] > 0)
          f = rows_around(bias[static_cast<std::size_t>(spk)][static_cast<std::size_t>(m)],
                          counts[m], cfg.noise, rng);
        turn.features(static_cast<Modality>(m)) = std::move(f);
      }
      video.turns.push_back(std::move(turn));
    }

    std::uniform_int_distribution<int> turn_pick(0, turn_count - 1);
    std::uniform_int_distribution<int> qlen(cfg.question_len_min, cfg.question_len_max);
    for (int q = 0; q < cfg.qa_per_video; ++q) {
      int t = turn_pick(rng);
      int spk = turn_speaker[static_cast<std::size_t>(t)];
      int other = spk;
      if (cfg.speakers > 1) {
        std::uniform_int_distribution<int> other_dist(0, cfg.speakers - 2);
        other = other_dist(rng);
        if (other >= spk) ++other;
      }
      Matrix q_center = cfg.answer_strength * answer_dir[static_cast<std::size_t>(spk)];
      Matrix wrong_center = cfg.speakers > 1
                                ? Matrix(cfg.answer_strength * answer_dir[static_cast<std::size_t>(other)])
                                : Matrix(Matrix::Zero(cfg.d_text, 1));
      QAItem item;
      item.question = rows_around(q_center, qlen(rng), cfg.noise, rng);
      item.correct = rows_around(q_center, qlen(rng), cfg.noise, rng);
      item.incorrect = rows_around(wrong_center, qlen(rng), cfg.noise, rng);
      video.qa_items.push_back(std::move(item));
    }

    records.push_back(std::move(video));
  }
  return records;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what, std::size_t line) {
  if (!j.is_array())
    throw std::invalid_argument("line " + std::to_string(line) + ": " + what + " is not an array");
  if (j.empty()) return Matrix(0, 0);
  std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols)
      throw std::invalid_argument("line " + std::to_string(line) + ": " + what +
                                  " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number())
        throw std::invalid_argument("line " + std::to_string(line) + ": " + what +
                                    " contains a non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_records(const std::string& path, const std::vector<VideoRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_records: cannot open '" + path + "' for writing");
  for (const VideoRecord& v : records) {
    json turns = json::array();
    for (const Turn& t : v.turns) {
      turns.push_back({{"speaker_id", t.speaker_id},
                       {"text", matrix_to_json(t.text)},
                       {"vision", matrix_to_json(t.vision)},
                       {"acoustic", matrix_to_json(t.acoustic)}});
    }
    json qa = json::array();
    for (const QAItem& item : v.qa_items) {
      qa.push_back({{"question", matrix_to_json(item.question)},
                    {"correct", matrix_to_json(item.correct)},
                    {"incorrect", matrix_to_json(item.incorrect)}});
    }
    json rec = {{"video_id", v.video_id}, {"turns", turns}, {"qa", qa}};
    out << rec.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_records: write to '" + path + "' failed");
}

namespace {

struct RecordParser {
  int dims[3] = {-1, -1, -1};
  std::size_t dim_line[3] = {0, 0, 0};
  int qa_dim = -1;

  VideoRecord parse(const json& j, std::size_t line_no) {
    VideoRecord v;
    v.video_id = j["video_id"].get<std::string>();
    for (std::size_t ti = 0; ti < j["turns"].size(); ++ti) {
      const json& jt = j["turns"][ti];
      Turn t;
      t.speaker_id = jt.value("speaker_id", std::string());
      const char* names[3] = {"text", "vision", "acoustic"};
      for (int m = 0; m < 3; ++m) {
        Matrix f = matrix_from_json(jt.value(names[m], json::array()),
                                    std::string("turn ") + std::to_string(ti) + " " + names[m],
                                    line_no);
        if (f.rows() > 0) {
          if (dims[m] == -1) {
            dims[m] = static_cast<int>(f.cols());
            dim_line[m] = line_no;
          } else if (static_cast<int>(f.cols()) != dims[m]) {
            throw std::invalid_argument(
                "line " + std::to_string(line_no) + ": modality " + names[m] + " has dim " +
                std::to_string(f.cols()) + ", expected " + std::to_string(dims[m]) +
                " (first seen on line " + std::to_string(dim_line[m]) + ")");
          }
        }
        t.features(static_cast<Modality>(m)) = std::move(f);
      }
      v.turns.push_back(std::move(t));
    }
    if (j.contains("qa")) {
      for (std::size_t qi = 0; qi < j["qa"].size(); ++qi) {
        const json& jq = j["qa"][qi];
        QAItem item;
        std::string ctx = "qa " + std::to_string(qi);
        item.question =
            matrix_from_json(jq.value("question", json::array()), ctx + " question", line_no);
        item.correct =
            matrix_from_json(jq.value("correct", json::array()), ctx + " correct", line_no);
        item.incorrect =
            matrix_from_json(jq.value("incorrect", json::array()), ctx + " incorrect", line_no);
        for (const Matrix* m : {&item.question, &item.correct, &item.incorrect}) {
          if (m->rows() == 0) continue;
          if (qa_dim == -1) {
            qa_dim = static_cast<int>(m->cols());
          } else if (static_cast<int>(m->cols()) != qa_dim) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + ctx +
                                        " has dim " + std::to_string(m->cols()) + ", expected " +
                                        std::to_string(qa_dim));
          }
        }
        v.qa_items.push_back(std::move(item));
      }
    }
    return v;
  }
};

}  // namespace

std::vector<VideoRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_records: cannot open '" + path + "'");
  std::vector<VideoRecord> records;
  std::string line;
  std::size_t line_no = 0;
  RecordParser parser;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": parse error: " + e.what());
    }
    if (!j.is_object() || !j.contains("video_id") || !j.contains("turns"))
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected an object with video_id and turns");
    VideoRecord v;
    try {
      v = parser.parse(j, line_no);
    } catch (const json::exception& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": malformed record: " +
                                  e.what());
    }
    try {
      validate_record(v);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(v));
  }
  return records;
}

}  // namespace stgc
