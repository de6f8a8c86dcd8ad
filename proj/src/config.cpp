#include "stgc/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace stgc {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& detail) {
  throw std::invalid_argument("config: key '" + key + "': " + detail);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_value(key, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) bad_value(key, "expected a number, got '" + v + "'");
  return x;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    bad_value(key, "expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) bad_value(key, "expected an integer, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, "expected true/false, got '" + v + "'");
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "hidden_dim") {
    hidden_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "heads") {
    heads = static_cast<int>(parse_int(key, value));
  } else if (key == "layers") {
    layers = static_cast<int>(parse_int(key, value));
  } else if (key == "lr") {
    lr = parse_double(key, value);
  } else if (key == "weight_decay") {
    weight_decay = parse_double(key, value);
  } else if (key == "batch_size") {
    batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "max_epochs") {
    max_epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "max_seq_len") {
    max_seq_len = static_cast<int>(parse_int(key, value));
  } else if (key == "factor_mode") {
    auto m = parse_factor_mode(value);
    if (!m) bad_value(key, "expected factorized|video_level|mean_readout, got '" + value + "'");
    factor_mode = *m;
  } else if (key == "z_cross_links") {
    z_cross_links = parse_bool(key, value);
  } else if (key == "attention_dropout") {
    attention_dropout = parse_double(key, value);
  } else if (key == "contrastive.tau") {
    tau = parse_double(key, value);
  } else if (key == "contrastive.include_positive_in_denominator") {
    include_positive_in_denominator = parse_bool(key, value);
  } else if (key == "contrastive.symmetric_anchors") {
    symmetric_anchors = parse_bool(key, value);
  } else if (key == "aug.node_drop") {
    aug.ratio[0] = parse_double(key, value);
  } else if (key == "aug.edge_perturb") {
    aug.ratio[1] = parse_double(key, value);
  } else if (key == "aug.node_mask") {
    aug.ratio[2] = parse_double(key, value);
  } else if (key == "aug.subgraph") {
    aug.ratio[3] = parse_double(key, value);
  } else if (key == "aug.enabled") {
    std::array<bool, kAugKindCount> enabled{false, false, false, false};
    std::stringstream ss(value);
    std::string item;
    bool any = false;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      auto k = parse_aug_kind(item);
      if (!k) bad_value(key, "unknown augmentation '" + item + "'");
      enabled[static_cast<std::size_t>(*k)] = true;
      any = true;
    }
    if (!any && trim(value) != "none") bad_value(key, "expected a comma list of augmentations or 'none'");
    aug.enabled = enabled;
  } else if (key == "finetune.mode") {
    auto m = parse_finetune_mode(value);
    if (!m) bad_value(key, "expected frozen|supervised_scratch, got '" + value + "'");
    finetune_mode = *m;
  } else if (key == "finetune.graph_scope") {
    auto s = parse_graph_scope(value);
    if (!s) bad_value(key, "expected turn_level|video_level, got '" + value + "'");
    graph_scope = *s;
  } else if (key == "probe.dropout") {
    probe_dropout = parse_double(key, value);
  } else if (key == "probe.max_epochs") {
    probe_max_epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "probe.patience") {
    probe_patience = static_cast<int>(parse_int(key, value));
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) bad_value(key, msg);
  };
  need(hidden_dim > 0, "hidden_dim", "must be positive");
  need(heads > 0, "heads", "must be positive");
  need(layers > 0, "layers", "must be positive");
  need(hidden_dim % heads == 0, "hidden_dim",
       "must be divisible by heads (" + std::to_string(hidden_dim) + " % " + std::to_string(heads) + " != 0)");
  need(lr > 0.0, "lr", "must be positive");
  need(weight_decay >= 0.0, "weight_decay", "must be >= 0");
  need(batch_size >= 1, "batch_size", "must be >= 1");
  need(max_epochs >= 1, "max_epochs", "must be >= 1");
  need(max_seq_len >= 1, "max_seq_len", "must be >= 1");
  need(attention_dropout >= 0.0 && attention_dropout < 1.0, "attention_dropout", "must be in [0, 1)");
  need(tau > 0.0, "contrastive.tau", "must be positive");
  need(probe_dropout >= 0.0 && probe_dropout < 1.0, "probe.dropout", "must be in [0, 1)");
  need(probe_max_epochs >= 1, "probe.max_epochs", "must be >= 1");
  need(probe_patience >= 1, "probe.patience", "must be >= 1");
  const char* names[kAugKindCount] = {"aug.node_drop", "aug.edge_perturb", "aug.node_mask", "aug.subgraph"};
  for (int k = 0; k < kAugKindCount; ++k)
    need(aug.ratio[static_cast<std::size_t>(k)] >= 0.0 && aug.ratio[static_cast<std::size_t>(k)] <= 1.0,
         names[k], "must be in [0, 1]");
}

std::string TrainConfig::to_kv() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "hidden_dim = " << hidden_dim << "\n";
  os << "heads = " << heads << "\n";
  os << "layers = " << layers << "\n";
  os << "lr = " << fmt(lr) << "\n";
  os << "weight_decay = " << fmt(weight_decay) << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "max_epochs = " << max_epochs << "\n";
  os << "max_seq_len = " << max_seq_len << "\n";
  os << "factor_mode = " << factor_mode_name(factor_mode) << "\n";
  os << "z_cross_links = " << (z_cross_links ? "true" : "false") << "\n";
  os << "attention_dropout = " << fmt(attention_dropout) << "\n";
  os << "contrastive.tau = " << fmt(tau) << "\n";
  os << "contrastive.include_positive_in_denominator = "
     << (include_positive_in_denominator ? "true" : "false") << "\n";
  os << "contrastive.symmetric_anchors = " << (symmetric_anchors ? "true" : "false") << "\n";
  os << "aug.node_drop = " << fmt(aug.ratio[0]) << "\n";
  os << "aug.edge_perturb = " << fmt(aug.ratio[1]) << "\n";
  os << "aug.node_mask = " << fmt(aug.ratio[2]) << "\n";
  os << "aug.subgraph = " << fmt(aug.ratio[3]) << "\n";
  os << "aug.enabled = ";
  bool first = true;
  bool any = false;
  for (int k = 0; k < kAugKindCount; ++k) {
    if (!aug.enabled[static_cast<std::size_t>(k)]) continue;
    if (!first) os << ",";
    os << aug_kind_name(static_cast<AugKind>(k));
    first = false;
    any = true;
  }
  if (!any) os << "none";
  os << "\n";
  os << "finetune.mode = " << finetune_mode_name(finetune_mode) << "\n";
  os << "finetune.graph_scope = " << graph_scope_name(graph_scope) << "\n";
  os << "probe.dropout = " << fmt(probe_dropout) << "\n";
  os << "probe.max_epochs = " << probe_max_epochs << "\n";
  os << "probe.patience = " << probe_patience << "\n";
  return os.str();
}

void apply_kv(TrainConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected key = value, got '" + s + "'");
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

TrainConfig TrainConfig::from_kv(const std::string& text) {
  TrainConfig cfg;
  apply_kv(cfg, text);
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  TrainConfig cfg = TrainConfig::from_kv(buf.str());
  cfg.validate();
  return cfg;
}

}  // namespace stgc
