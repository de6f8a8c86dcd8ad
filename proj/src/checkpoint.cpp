#include "stgc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace stgc {

namespace {

constexpr char kMagic[8] = {'F', '2', 'F', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix(std::ostream& out, const Matrix& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

void write_table(std::ostream& out, const std::vector<std::pair<std::string, Matrix>>& table) {
  write_u64(out, table.size());
  for (const auto& [name, m] : table) {
    write_string(out, name);
    write_matrix(out, m);
  }
}

struct Reader {
  std::istream& in;

  void raw(void* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof(v));
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    raw(&v, sizeof(v));
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    raw(&v, sizeof(v));
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    if (n > 0) raw(s.data(), n);
    return s;
  }
  Matrix matrix() {
    std::uint64_t rows = u64(), cols = u64();
    if (rows > (1ull << 24) || cols > (1ull << 24))
      throw std::runtime_error("checkpoint: implausible tensor shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (m.size() > 0) raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  std::vector<std::pair<std::string, Matrix>> table() {
    std::uint64_t n = u64();
    std::vector<std::pair<std::string, Matrix>> t;
    t.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string name = str();
      t.emplace_back(std::move(name), matrix());
    }
    return t;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  write_string(out, ckpt.phase);
  write_string(out, ckpt.config_kv);
  write_i64(out, ckpt.epoch);
  write_string(out, ckpt.rng_state);
  write_i32(out, ckpt.d_text);
  write_i32(out, ckpt.d_vision);
  write_i32(out, ckpt.d_acoustic);
  write_i32(out, ckpt.d_q);
  write_table(out, ckpt.tensors);
  write_u64(out, ckpt.has_optim ? 1 : 0);
  if (ckpt.has_optim) {
    write_i64(out, ckpt.optim_step);
    write_table(out, ckpt.optim_m);
    write_table(out, ckpt.optim_v);
  }
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
  Reader r{in};
  Checkpoint ckpt;
  ckpt.phase = r.str();
  ckpt.config_kv = r.str();
  ckpt.epoch = r.i64();
  ckpt.rng_state = r.str();
  ckpt.d_text = r.i32();
  ckpt.d_vision = r.i32();
  ckpt.d_acoustic = r.i32();
  ckpt.d_q = r.i32();
  ckpt.tensors = r.table();
  ckpt.has_optim = r.u64() != 0;
  if (ckpt.has_optim) {
    ckpt.optim_step = r.i64();
    ckpt.optim_m = r.table();
    ckpt.optim_v = r.table();
  }
  return ckpt;
}

void collect_tensors(Checkpoint& ckpt, const NamedParams& params) {
  for (const auto& [name, p] : params) ckpt.tensors.emplace_back(name, p->value);
}

namespace {

const Matrix* find_tensor(const std::vector<std::pair<std::string, Matrix>>& table,
                          const std::string& name) {
  for (const auto& [n, m] : table)
    if (n == name) return &m;
  return nullptr;
}

}  // namespace

void restore_tensors(const Checkpoint& ckpt, const NamedParams& params) {
  for (const auto& [name, p] : params) {
    const Matrix* m = find_tensor(ckpt.tensors, name);
    if (m == nullptr) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    if (m->rows() != p->value.rows() || m->cols() != p->value.cols())
      throw std::runtime_error("checkpoint: tensor '" + name + "' has shape [" +
                               std::to_string(m->rows()) + " x " + std::to_string(m->cols()) +
                               "], expected [" + std::to_string(p->value.rows()) + " x " +
                               std::to_string(p->value.cols()) + "]");
    p->value = *m;
    p->zero_grad();
  }
}

void collect_optimizer(Checkpoint& ckpt, AdamW& opt, const NamedParams& params) {
  if (opt.params().size() != params.size())
    throw std::logic_error("checkpoint: optimizer/param listing size mismatch");
  ckpt.has_optim = true;
  ckpt.optim_step = opt.step_count();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.optim_m.emplace_back(params[i].first, opt.slots()[i].m);
    ckpt.optim_v.emplace_back(params[i].first, opt.slots()[i].v);
  }
}

void restore_optimizer(const Checkpoint& ckpt, AdamW& opt, const NamedParams& params) {
  if (!ckpt.has_optim) throw std::runtime_error("checkpoint: no optimizer state present");
  if (opt.params().size() != params.size())
    throw std::logic_error("checkpoint: optimizer/param listing size mismatch");
  opt.set_step_count(ckpt.optim_step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix* m = find_tensor(ckpt.optim_m, params[i].first);
    const Matrix* v = find_tensor(ckpt.optim_v, params[i].first);
    if (m == nullptr || v == nullptr)
      throw std::runtime_error("checkpoint: missing optimizer state for '" + params[i].first + "'");
    opt.slots()[i].m = *m;
    opt.slots()[i].v = *v;
  }
}

std::uint64_t params_hash(const NamedParams& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, p] : params) {
    mix(name.data(), name.size());
    mix(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (is.fail()) throw std::runtime_error("checkpoint: bad rng state");
  return rng;
}

}  // namespace stgc
