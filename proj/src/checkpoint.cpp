#include "interaction/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace interaction {

namespace {

constexpr char kMagic[8] = {'I', 'X', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void matrix_data(const Matrix& m) {
    for (double v : m.data) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix matrix(int rows, int cols) {
    need(static_cast<std::size_t>(rows) * cols * 8);
    Matrix m(rows, cols);
    for (double& v : m.data) v = f64();
    return m;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(c.version);
  w.str(c.model_kind);
  w.str(c.config);
  w.u64(c.vocab_hash);
  w.u64(static_cast<std::uint64_t>(c.seed));
  w.u32(c.epoch);
  w.f64(c.val_loss);
  w.u32(static_cast<std::uint32_t>(c.parameters.size()));
  for (const auto& p : c.parameters) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rows));
    w.u32(static_cast<std::uint32_t>(p.value.cols));
    w.matrix_data(p.value);
  }
  w.u8(c.optimizer ? 1 : 0);
  if (c.optimizer) {
    const auto& o = *c.optimizer;
    if (o.first_moment.size() != c.parameters.size() ||
        o.second_moment.size() != c.parameters.size())
      throw CheckpointError("optimizer state does not match parameter list");
    w.u64(o.step);
    for (const auto& m : o.first_moment) w.matrix_data(m);
    for (const auto& m : o.second_moment) w.matrix_data(m);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8();
  Checkpoint c;
  c.version = r.u32();
  if (c.version != Checkpoint::kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version));
  c.model_kind = r.str();
  c.config = r.str();
  c.vocab_hash = r.u64();
  c.seed = static_cast<std::int64_t>(r.u64());
  c.epoch = r.u32();
  c.val_loss = r.f64();
  const std::uint32_t n = r.u32();
  c.parameters.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedArray a;
    a.name = r.str();
    const int rows = static_cast<int>(r.u32());
    const int cols = static_cast<int>(r.u32());
    a.value = r.matrix(rows, cols);
    c.parameters.push_back(std::move(a));
  }
  if (r.u8()) {
    OptimizerState o;
    o.step = r.u64();
    for (const auto& p : c.parameters) o.first_moment.push_back(r.matrix(p.value.rows, p.value.cols));
    for (const auto& p : c.parameters) o.second_moment.push_back(r.matrix(p.value.rows, p.value.cols));
    c.optimizer = std::move(o);
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

std::vector<NamedArray> snapshot_parameters(const ParameterStore& store) {
  std::vector<NamedArray> out;
  out.reserve(store.entries().size());
  for (const auto& e : store.entries()) out.push_back({e.name, e.var.value()});
  return out;
}

void restore_parameters(ParameterStore& store, const std::vector<NamedArray>& arrays) {
  const auto& entries = store.entries();
  if (entries.size() != arrays.size())
    throw CheckpointError("checkpoint has " + std::to_string(arrays.size()) +
                          " parameter arrays, model expects " + std::to_string(entries.size()));
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (entries[i].name != arrays[i].name)
      throw CheckpointError("parameter " + std::to_string(i) + " is '" + arrays[i].name +
                            "', model expects '" + entries[i].name + "'");
    if (!entries[i].var.value().same_shape(arrays[i].value))
      throw CheckpointError("shape mismatch for parameter '" + arrays[i].name + "'");
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    Var v = entries[i].var;
    v.mutable_value() = arrays[i].value;
  }
}

}  // namespace interaction
