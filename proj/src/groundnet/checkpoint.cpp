#include "rdvq/groundnet/checkpoint.hpp"

#include <cstring>

#include "rdvq/io/formats.hpp"

namespace rdvq {

namespace {

class Writer {
 public:
  void u8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float f) {
    uint32_t b;
    std::memcpy(&b, &f, 4);
    u32(b);
  }
  void f64(double d) {
    uint64_t b;
    std::memcpy(&b, &d, 8);
    u64(b);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    out_ += s;
  }
  void tensor(const Tensor<float>& t) {
    u32(static_cast<uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u32(static_cast<uint32_t>(d));
    for (float v : t.values()) f32(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::string source) : in_(in), source_(std::move(source)) {}

  void need(std::size_t n) {
    if (pos_ + n > in_.size())
      throw DataError(str_cat(source_, ": offset ", pos_, ": truncated checkpoint (need ", n, " bytes)"));
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(in_[pos_++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    const uint32_t b = u32();
    float f;
    std::memcpy(&f, &b, 4);
    return f;
  }
  double f64() {
    const uint64_t b = u64();
    double d;
    std::memcpy(&d, &b, 8);
    return d;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Tensor<float> tensor() {
    const uint32_t rank = u32();
    if (rank > 8) fail("implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = u32();
    const std::size_t n = shape_size(shape);
    need(4 * n);
    Tensor<float> t(shape);
    for (std::size_t i = 0; i < n; ++i) t[i] = f32();
    return t;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(str_cat(source_, ": offset ", pos_, ": ", msg));
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string model_config_text(const AudioBranchConfig& a, const QuantizerConfig& q) {
  std::string s = "[model]\n";
  s += "batchnorm = " + std::string(a.batchnorm ? "true" : "false") + "\n";
  s += "conv0_width = " + std::to_string(a.conv0_width) + "\n";
  s += "convs_per_block = " + std::to_string(a.convs_per_block) + "\n";
  s += "embed_dim = " + std::to_string(a.embed_dim) + "\n";
  s += "image_dim = " + std::to_string(a.image_dim) + "\n";
  s += "input_bins = " + std::to_string(a.input_bins) + "\n";
  s += "kernel_width = " + std::to_string(a.kernel_width) + "\n";
  s += "strides = " + join(a.strides) + "\n";
  s += "widths = " + join(a.widths) + "\n";
  s += "[quantizer]\n";
  s += "codebook_size = " + std::to_string(q.codebook_size) + "\n";
  s += "eps_smooth = " + fmt17(q.eps_smooth) + "\n";
  s += "gamma = " + fmt17(q.gamma) + "\n";
  s += "jitter = " + fmt17(q.jitter) + "\n";
  s += "reinit_dead_codes = " + std::string(q.reinit_dead_codes ? "true" : "false") + "\n";
  return s;
}

void apply_model_config_text(const std::string& text, AudioBranchConfig& a, QuantizerConfig& q) {
  const Config cfg = Config::parse(text, "<checkpoint config>");
  a = AudioBranchConfig::from(cfg);
  q = QuantizerConfig::from(cfg);
}

std::string encode_checkpoint(const ModelState& state, const CheckpointMeta& meta) {
  Writer w;
  w.u8('R');
  w.u8('D');
  w.u8('V');
  w.u8('Q');
  w.u32(kCheckpointVersion);
  w.u64(state.config_hash);
  w.str(meta.stage);
  w.u32(meta.epoch);
  w.f64(meta.r10_a2i);
  w.f64(meta.r10_i2a);
  w.f64(meta.r10_avg);
  w.str(model_config_text(state.config, state.quantizer));

  std::map<std::string, const Tensor<float>*> tensors;
  for (const auto& [name, p] : state.params) tensors[name] = &p.value;
  for (const auto& [name, s] : state.bn) {
    tensors[name + ".running_mean"] = &s.running_mean;
    tensors[name + ".running_var"] = &s.running_var;
  }
  w.u32(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.tensor(*t);
  }
  for (const auto& cb : state.vq) {
    w.u8(cb.enabled ? 1 : 0);
    w.u8(cb.needs_init ? 1 : 0);
    w.tensor(cb.E);
    w.tensor(cb.ema_count);
    w.tensor(cb.ema_sum);
  }
  return w.take();
}

ModelState decode_checkpoint(const std::string& bytes, CheckpointMeta* meta, const std::string& source) {
  Reader r(bytes, source);
  if (bytes.size() < 4 || bytes.compare(0, 4, "RDVQ") != 0) r.fail("missing RDVQ magic");
  for (int i = 0; i < 4; ++i) r.u8();
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail(str_cat("unsupported checkpoint version ", version));
  const uint64_t hash = r.u64();
  CheckpointMeta m;
  m.stage = r.str();
  m.epoch = r.u32();
  m.r10_a2i = r.f64();
  m.r10_i2a = r.f64();
  m.r10_avg = r.f64();
  AudioBranchConfig acfg;
  QuantizerConfig qcfg;
  try {
    apply_model_config_text(r.str(), acfg, qcfg);
  } catch (const DataError& e) {
    r.fail(std::string("bad embedded config: ") + e.what());
  }
  ModelState st = build_model(acfg, qcfg, 0, hash);

  const uint32_t n = r.u32();
  std::size_t expected = st.params.size() + 2 * st.bn.size();
  if (n != expected) r.fail(str_cat("expected ", expected, " tensors, found ", n));
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Tensor<float> t = r.tensor();
    Tensor<float>* dst = nullptr;
    if (auto it = st.params.find(name); it != st.params.end()) {
      dst = &it->second.value;
    } else if (name.size() > 13 && name.ends_with(".running_mean")) {
      auto bn = st.bn.find(name.substr(0, name.size() - 13));
      if (bn != st.bn.end()) dst = &bn->second.running_mean;
    } else if (name.size() > 12 && name.ends_with(".running_var")) {
      auto bn = st.bn.find(name.substr(0, name.size() - 12));
      if (bn != st.bn.end()) dst = &bn->second.running_var;
    }
    if (!dst) r.fail("unexpected tensor '" + name + "'");
    if (dst->shape() != t.shape())
      r.fail(str_cat("tensor '", name, "' has shape ", shape_str(t.shape()), ", expected ", shape_str(dst->shape())));
    *dst = std::move(t);
  }
  for (auto& [name, p] : st.params) p.zero_grad();
  for (auto& cb : st.vq) {
    cb.enabled = r.u8() != 0;
    cb.needs_init = r.u8() != 0;
    Tensor<float> E = r.tensor(), count = r.tensor(), sum = r.tensor();
    if (E.shape() != cb.E.shape() || count.shape() != cb.ema_count.shape() || sum.shape() != cb.ema_sum.shape())
      r.fail("codebook shape does not match the embedded config");
    cb.E = std::move(E);
    cb.ema_count = std::move(count);
    cb.ema_sum = std::move(sum);
  }
  if (!r.done()) r.fail("trailing bytes after checkpoint");
  if (meta) *meta = m;
  return st;
}

void save_checkpoint(const std::string& path, const ModelState& state, const CheckpointMeta& meta) {
  write_file_atomic(path, encode_checkpoint(state, meta));
}

ModelState load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  return decode_checkpoint(read_file(path), meta, path);
}

}  // namespace rdvq
