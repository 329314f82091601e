#include "rsc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rsc {
namespace {

constexpr char kMagic[8] = {'R', 'S', 'C', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw TruncatedFile("checkpoint ends early");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  bool match(const char* p, std::size_t n) {
    need(n);
    const bool ok = std::memcmp(in_.data() + pos_, p, n) == 0;
    pos_ += n;
    return ok;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return &t;
  }
  return nullptr;
}

void Checkpoint::add_params(const std::string& prefix, const ParameterSet<float>& params) {
  for (const auto& p : params) arrays.emplace_back(prefix + p->name, p->value);
}

void Checkpoint::load_params(const std::string& prefix, ParameterSet<float>& params) const {
  for (auto& p : params) {
    const Tensor* t = find(prefix + p->name);
    if (!t) throw ShapeMismatch("checkpoint lacks array " + prefix + p->name);
    if (t->shape() != p->value.shape()) {
      throw ShapeMismatch("checkpoint array " + prefix + p->name + " has shape " +
                          shape_str(t->shape()) + ", model expects " +
                          shape_str(p->value.shape()));
    }
    p->value = *t;
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(ckpt.version);
  std::ostringstream cfg;
  for (const auto& [k, v] : ckpt.config) cfg << k << " = " << v << '\n';
  w.str(cfg.str());
  w.u32(static_cast<std::uint32_t>(ckpt.seeds.size()));
  for (const auto& [k, v] : ckpt.seeds) {
    w.str(k);
    w.u64(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, t] : ckpt.arrays) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    for (float v : t.values()) w.f32(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (!r.match(kMagic, sizeof kMagic)) throw BadMagic("not a checkpoint file");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion) {
    throw UnsupportedVersion("checkpoint version " + std::to_string(ckpt.version) +
                             ", reader understands " + std::to_string(kCheckpointVersion));
  }
  std::istringstream cfg(r.str());
  for (std::string line; std::getline(cfg, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) ckpt.config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  const std::uint32_t n_seeds = r.u32();
  for (std::uint32_t i = 0; i < n_seeds; ++i) {
    std::string name = r.str();
    ckpt.seeds[name] = r.u64();
  }
  const std::uint32_t n_arrays = r.u32();
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& e : shape) e = r.u64();
    const std::size_t n = shape_size(shape);
    r.need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32();
    ckpt.arrays.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw TruncatedFile("trailing bytes after checkpoint arrays");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".partial";
  std::error_code ec;
  try {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw DoomedCheckpoint("cannot open " + tmp.string());
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      out.flush();
      if (!out) throw DoomedCheckpoint("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DoomedCheckpoint("rename to " + path.string() + ": " + ec.message());
  } catch (...) {
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpoint(path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace rsc
