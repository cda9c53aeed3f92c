#include "rdvq/groundnet/model.hpp"

#include <cmath>

#include "rdvq/simd/kernels.hpp"

namespace rdvq {

namespace {

std::vector<std::size_t> to_sizes(const std::vector<long>& v, const char* key) {
  std::vector<std::size_t> out;
  for (long x : v) {
    if (x <= 0) throw DataError(std::string("config model.") + key + ": entries must be positive");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

std::string block_name(std::size_t b) { return str_cat("audio.res", b + 1); }

void add_param(ModelState& st, const std::string& name, Tensor<float> value) {
  st.params.emplace(name, Parameter<float>(name, std::move(value)));
}

Tensor<float> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<float> t(std::move(shape));
  std::normal_distribution<double> n(0.0, std::sqrt(2.0 / double(fan_in)));
  for (auto& v : t.values()) v = float(n(rng));
  return t;
}

void add_conv(ModelState& st, const std::string& name, std::size_t cout, std::size_t cin,
              std::size_t width, Rng& rng) {
  add_param(st, name + ".weight", he_normal({cout, cin, width}, cin * width, rng));
  if (st.config.batchnorm) {
    add_param(st, name + ".bn.gamma", Tensor<float>({cout}, 1.0f));
    add_param(st, name + ".bn.beta", Tensor<float>({cout}, 0.0f));
    st.bn.emplace(name + ".bn", BatchNormStats<float>(cout));
  } else {
    add_param(st, name + ".bias", Tensor<float>({cout}, 0.0f));
  }
}

struct Ctx {
  Graph<float>& g;
  ModelState& st;
  Mode mode;

  Var<float> p(const std::string& name) {
    auto it = st.params.find(name);
    if (it == st.params.end()) throw std::logic_error("missing parameter " + name);
    return mode == Mode::kTrain ? g.parameter(it->second) : g.constant(it->second.value);
  }

  // conv -> batchnorm (or bias), no activation.
  Var<float> conv_norm(Var<float> x, const std::string& name, std::size_t stride, std::size_t pad) {
    if (!st.config.batchnorm) return conv1d<float>(x, p(name + ".weight"), p(name + ".bias"), stride, pad);
    Var<float> y = conv1d<float>(x, p(name + ".weight"), std::nullopt, stride, pad);
    return batchnorm(y, p(name + ".bn.gamma"), p(name + ".bn.beta"), st.bn.at(name + ".bn"), mode);
  }
};

}  // namespace

AudioBranchConfig AudioBranchConfig::from(const Config& cfg) {
  AudioBranchConfig c;
  c.input_bins = cfg.get_int("model", "input_bins");
  c.conv0_width = cfg.get_int("model", "conv0_width");
  c.widths = to_sizes(cfg.get_int_list("model", "widths"), "widths");
  c.strides = to_sizes(cfg.get_int_list("model", "strides"), "strides");
  c.convs_per_block = cfg.get_int("model", "convs_per_block");
  c.kernel_width = cfg.get_int("model", "kernel_width");
  c.batchnorm = cfg.get_bool("model", "batchnorm");
  c.embed_dim = cfg.get_int("model", "embed_dim");
  c.image_dim = cfg.get_int("model", "image_dim");
  c.validate();
  return c;
}

void AudioBranchConfig::validate() const {
  if (widths.size() != 4 || strides.size() != 4)
    throw DataError("model.widths and model.strides need exactly four entries");
  if (convs_per_block < 1) throw DataError("model.convs_per_block must be at least 1");
  if (kernel_width % 2 == 0) throw DataError("model.kernel_width must be odd");
  if (conv0_width % 2 == 0) throw DataError("model.conv0_width must be odd");
  if (input_bins == 0 || embed_dim == 0 || image_dim == 0) throw DataError("model dimensions must be positive");
}

std::size_t AudioBranchConfig::frames_after_block(std::size_t T, std::size_t block) const {
  // "Same" padding: each strided layer maps T to ceil(T / stride).
  for (std::size_t b = 0; b < block; ++b) T = (T + strides[b] - 1) / strides[b];
  return T;
}

std::size_t AudioBranchConfig::min_frames() const {
  // Padding keeps every layer valid down to one frame; require the whole
  // stride product so the last block sees a full step.
  std::size_t prod = 1;
  for (std::size_t s : strides) prod *= s;
  return std::max<std::size_t>(prod, 1);
}

Codebook<float>& ModelState::codebook(int layer) {
  if (layer != 2 && layer != 3) throw std::invalid_argument(str_cat("no VQ layer ", layer));
  return vq[layer - 2];
}

const Codebook<float>& ModelState::codebook(int layer) const {
  if (layer != 2 && layer != 3) throw std::invalid_argument(str_cat("no VQ layer ", layer));
  return vq[layer - 2];
}

std::set<int> ModelState::enabled_layers() const {
  std::set<int> out;
  for (int l : kVqLayers)
    if (codebook(l).enabled) out.insert(l);
  return out;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params) n += p.value.size();
  return n;
}

std::vector<std::string> tap_names() {
  return {"conv1", "res1", "res2", "vq2", "res3", "vq3", "res4"};
}

ModelState build_model(const AudioBranchConfig& cfg, const QuantizerConfig& qcfg, uint64_t seed,
                       uint64_t config_hash) {
  cfg.validate();
  qcfg.validate();
  ModelState st;
  st.config = cfg;
  st.quantizer = qcfg;
  st.config_hash = config_hash;
  Rng rng(seed);
  add_conv(st, "audio.conv0", cfg.widths[0], cfg.input_bins, cfg.conv0_width, rng);
  std::size_t cin = cfg.widths[0];
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string name = block_name(b);
    const std::size_t w = cfg.widths[b];
    for (std::size_t k = 0; k < cfg.convs_per_block; ++k)
      add_conv(st, str_cat(name, ".conv", k + 1), w, k == 0 ? cin : w, cfg.kernel_width, rng);
    if (cin != w || cfg.strides[b] != 1) add_conv(st, name + ".shortcut", w, cin, 1, rng);
    cin = w;
  }
  if (cfg.embed_dim != cfg.widths[3]) add_conv(st, "audio.proj", cfg.embed_dim, cin, 1, rng);
  {
    Tensor<float> w({cfg.embed_dim, cfg.image_dim});
    std::normal_distribution<double> n(0.0, std::sqrt(1.0 / double(cfg.image_dim)));
    for (auto& v : w.values()) v = float(n(rng));
    add_param(st, "image.weight", std::move(w));
    add_param(st, "image.bias", Tensor<float>({cfg.embed_dim}, 0.0f));
  }
  st.vq[0] = Codebook<float>(qcfg.codebook_size, cfg.widths[1]);
  st.vq[1] = Codebook<float>(qcfg.codebook_size, cfg.widths[2]);
  return st;
}

void enable_layers(ModelState& state, const std::set<int>& layers) {
  for (int l : layers)
    if (l != 2 && l != 3) throw DataError(str_cat("VQ layer ", l, " does not exist (choose from 2, 3)"));
  for (int l : kVqLayers) state.codebook(l).enabled = layers.count(l) > 0;
}

void warm_start(ModelState& state, const ModelState& source) {
  std::vector<std::string> problems;
  for (const auto& [name, p] : state.params) {
    auto it = source.params.find(name);
    if (it == source.params.end()) problems.push_back(name + " missing from source");
    else if (it->second.value.shape() != p.value.shape())
      problems.push_back(name + " " + shape_str(it->second.value.shape()) + " vs " + shape_str(p.value.shape()));
  }
  for (const auto& [name, p] : source.params)
    if (!state.params.count(name)) problems.push_back(name + " not present in target");
  for (int l : kVqLayers)
    if (source.codebook(l).E.shape() != state.codebook(l).E.shape() && !source.codebook(l).needs_init)
      problems.push_back(str_cat("vq", l, " codebook ", shape_str(source.codebook(l).E.shape()), " vs ",
                                 shape_str(state.codebook(l).E.shape())));
  if (!problems.empty()) {
    std::string msg = "incompatible checkpoint:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  for (auto& [name, p] : state.params) {
    p.value = source.params.at(name).value;
    p.zero_grad();
  }
  for (auto& [name, s] : state.bn) s = source.bn.at(name);
  for (int l : kVqLayers) {
    if (source.codebook(l).needs_init) {
      state.codebook(l).needs_init = true;
      continue;
    }
    const bool want = state.codebook(l).enabled;
    state.codebook(l) = source.codebook(l);
    state.codebook(l).enabled = want;
  }
}

AudioForward audio_forward(Graph<float>& g, ModelState& st, const std::vector<const Tensor<float>*>& specs,
                           const ForwardOptions& opt) {
  const auto& cfg = st.config;
  if (specs.empty()) throw std::invalid_argument("audio_forward: empty batch");
  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  for (const auto* s : specs) {
    if (s->rank() != 2 || s->dim(1) != cfg.input_bins)
      throw DataError(str_cat("spectrogram has shape ", shape_str(s->shape()), ", expected frames x ",
                              cfg.input_bins));
    if (s->dim(0) < cfg.min_frames())
      throw DataError(str_cat("utterance has ", s->dim(0), " frames, the audio branch needs at least ",
                              cfg.min_frames()));
    lengths.push_back(s->dim(0));
    total += s->dim(0);
  }
  Tensor<float> packed({cfg.input_bins, total});
  std::size_t off = 0;
  for (const auto* s : specs) {
    const std::size_t T = s->dim(0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t b = 0; b < cfg.input_bins; ++b) packed(b, off + t) = (*s)(t, b);
    off += T;
  }

  Ctx c{g, st, opt.mode};
  AudioForward out;
  auto tap = [&](const std::string& name, Var<float> v) {
    if (opt.keep_taps) out.taps[name] = v;
  };

  Var<float> x = g.constant(std::move(packed), lengths);
  x = relu(c.conv_norm(x, "audio.conv0", 1, cfg.conv0_width / 2));
  tap("conv1", x);
  const std::size_t pad = cfg.kernel_width / 2;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string name = block_name(b);
    Var<float> h = x;
    for (std::size_t k = 0; k < cfg.convs_per_block; ++k) {
      h = c.conv_norm(h, str_cat(name, ".conv", k + 1), k == 0 ? cfg.strides[b] : 1, pad);
      if (k + 1 < cfg.convs_per_block) h = relu(h);
    }
    Var<float> shortcut = st.params.count(name + ".shortcut.weight")
                              ? c.conv_norm(x, name + ".shortcut", cfg.strides[b], 0)
                              : x;
    x = relu(add(h, shortcut));
    tap(str_cat("res", b + 1), x);

    const int layer = int(b) + 1;  // VQ2 follows block 2, VQ3 block 3
    if (layer == 2 || layer == 3) {
      Codebook<float>& cb = st.codebook(layer);
      const std::size_t slot = layer - 2;
      bool active = cb.enabled;
      if (active && cb.needs_init) {
        if (opt.mode == Mode::kTrain) {
          if (!opt.rng) throw std::logic_error("audio_forward: train mode needs an rng");
          init_from_batch(cb, x.value(), *opt.rng);
        } else {
          active = false;
        }
      }
      if (active) {
        Quantized<float> q = quantize_sequence(x, cb);
        out.pre_quant[slot] = x.value();
        out.codes[slot] = q.codes;
        out.segments[slot] = x.segments();
        x = q.q;
        if (opt.mode == Mode::kTrain && st.quantizer.jitter > 0) {
          if (!opt.rng) throw std::logic_error("audio_forward: train mode needs an rng");
          x = gather_columns(x, jitter_index(x.segments(), st.quantizer.jitter, *opt.rng));
        }
      } else {
        x = bypass(x);
      }
      tap(str_cat("vq", layer), x);
    }
  }
  if (st.params.count("audio.proj.weight")) x = c.conv_norm(x, "audio.proj", 1, 0);
  out.embeddings = mean_pool_time(x);
  return out;
}

Var<float> image_forward(Graph<float>& g, ModelState& st, const Tensor<float>& feats, Mode mode) {
  if (feats.rank() != 2 || feats.dim(0) != st.config.image_dim)
    throw DataError(str_cat("image features have shape ", shape_str(feats.shape()), ", expected ",
                            st.config.image_dim, " x B"));
  Ctx c{g, st, mode};
  return add_col_bias(matmul(c.p("image.weight"), g.constant(feats)), c.p("image.bias"));
}

Var<float> similarity_matrix(Var<float> image_emb, Var<float> audio_emb) {
  return matmul(transpose(image_emb), audio_emb);
}

Tensor<float> similarity_matrix(const Tensor<float>& image_emb, const Tensor<float>& audio_emb) {
  if (image_emb.rank() != 2 || audio_emb.rank() != 2 || image_emb.dim(0) != audio_emb.dim(0))
    throw std::invalid_argument("similarity_matrix: embedding dimensions differ");
  const std::size_t d = image_emb.dim(0), bi = image_emb.dim(1), ba = audio_emb.dim(1);
  Tensor<float> s({bi, ba});
  simd::gemm(true, false, bi, ba, d, image_emb.data(), audio_emb.data(), s.data(), false);
  return s;
}

AudioEmbedding embed_audio(const Tensor<float>& spec, ModelState& state, Mode mode) {
  Graph<float> g;
  Rng rng(0);
  ForwardOptions opt;
  opt.mode = mode;
  opt.rng = &rng;
  opt.keep_taps = true;
  AudioForward f = audio_forward(g, state, {&spec}, opt);
  AudioEmbedding e;
  e.embedding.assign(f.embeddings.value().values().begin(), f.embeddings.value().values().end());
  for (auto& [name, v] : f.taps) e.taps[name] = v.value();
  for (int l : kVqLayers)
    if (!f.codes[l - 2].empty()) e.codes[l] = f.codes[l - 2];
  return e;
}

std::vector<float> embed_image(const std::vector<float>& feat, ModelState& state) {
  Graph<float> g;
  Tensor<float> x({feat.size(), 1}, feat);
  Var<float> y = image_forward(g, state, x, Mode::kEval);
  return {y.value().values().begin(), y.value().values().end()};
}

Tensor<float> embed_audio_batch(const std::vector<const Tensor<float>*>& specs, ModelState& state,
                                std::size_t batch) {
  Tensor<float> out({state.config.embed_dim, specs.size()});
  for (std::size_t s = 0; s < specs.size(); s += batch) {
    const std::size_t e = std::min(specs.size(), s + batch);
    std::vector<const Tensor<float>*> part(specs.begin() + s, specs.begin() + e);
    Graph<float> g;
    AudioForward f = audio_forward(g, state, part, ForwardOptions{});
    const Tensor<float>& emb = f.embeddings.value();
    for (std::size_t d = 0; d < emb.dim(0); ++d)
      for (std::size_t j = 0; j < emb.dim(1); ++j) out(d, s + j) = emb(d, j);
  }
  return out;
}

Tensor<float> embed_image_batch(const std::vector<const std::vector<float>*>& feats, ModelState& state) {
  const std::size_t F = state.config.image_dim;
  Tensor<float> x({F, feats.size()});
  for (std::size_t j = 0; j < feats.size(); ++j) {
    if (feats[j]->size() != F)
      throw DataError(str_cat("image feature has dimension ", feats[j]->size(), ", expected ", F));
    for (std::size_t d = 0; d < F; ++d) x(d, j) = (*feats[j])[d];
  }
  Graph<float> g;
  return image_forward(g, state, x, Mode::kEval).value();
}

}  // namespace rdvq
