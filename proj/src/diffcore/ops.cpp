#include "rdvq/diffcore/ops.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "rdvq/simd/kernels.hpp"

namespace rdvq {

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank)
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " +
                                std::to_string(rank) + ", got " + shape_str(s));
}

std::vector<std::size_t> offsets_of(const std::vector<std::size_t>& lengths) {
  std::vector<std::size_t> off(lengths.size() + 1, 0);
  for (std::size_t i = 0; i < lengths.size(); ++i) off[i + 1] = off[i] + lengths[i];
  return off;
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t width, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw std::invalid_argument("conv1d: stride must be positive");
  if (width > length + 2 * pad)
    throw std::invalid_argument("conv1d: kernel width " + std::to_string(width) +
                                " exceeds padded time dimension " +
                                std::to_string(length + 2 * pad));
  return (length + 2 * pad - width) / stride + 1;
}

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> kernel, std::optional<Var<T>> bias, std::size_t stride,
              std::size_t pad) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& kv = kernel.value();
  require_rank(xv.shape(), 2, "conv1d", "input");
  require_rank(kv.shape(), 3, "conv1d", "kernel");
  const std::size_t cin = xv.dim(0), cout = kv.dim(0), width = kv.dim(2);
  if (kv.dim(1) != cin)
    throw std::invalid_argument("conv1d: input channel dimension mismatch: input has " +
                                std::to_string(cin) + ", kernel expects " +
                                std::to_string(kv.dim(1)));
  if (bias && bias->value().size() != cout)
    throw std::invalid_argument("conv1d: bias dimension " + std::to_string(bias->value().size()) +
                                " does not match output channels " + std::to_string(cout));
  const std::vector<std::size_t> in_len = x.segments();
  std::vector<std::size_t> out_len;
  for (std::size_t L : in_len) out_len.push_back(conv_output_length(L, width, stride, pad));
  const auto in_off = offsets_of(in_len), out_off = offsets_of(out_len);
  const std::size_t n_in = in_off.back(), n_out = out_off.back(), rows = cin * width;

  auto cols = std::make_shared<std::vector<T>>(rows * n_out, T(0));
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* xrow = xv.data() + ci * n_in;
    for (std::size_t w = 0; w < width; ++w) {
      T* crow = cols->data() + (ci * width + w) * n_out;
      for (std::size_t s = 0; s < in_len.size(); ++s) {
        const T* src = xrow + in_off[s];
        T* dst = crow + out_off[s];
        const long L = static_cast<long>(in_len[s]);
        for (std::size_t t = 0; t < out_len[s]; ++t) {
          const long pos = static_cast<long>(t * stride + w) - static_cast<long>(pad);
          dst[t] = (pos >= 0 && pos < L) ? src[pos] : T(0);
        }
      }
    }
  }

  Tensor<T> out({cout, n_out});
  simd::kernels<T>().gemm(cout, n_out, rows, kv.data(), cols->data(), out.data(), false);
  if (bias) {
    const Tensor<T>& bv = bias->value();
    for (std::size_t co = 0; co < cout; ++co) {
      T* orow = out.data() + co * n_out;
      for (std::size_t t = 0; t < n_out; ++t) orow[t] += bv[co];
    }
  }

  std::vector<Var<T>> inputs{x, kernel};
  if (bias) inputs.push_back(*bias);
  const std::size_t xid = x.id(), kid = kernel.id();
  const std::optional<std::size_t> bid = bias ? std::optional<std::size_t>(bias->id()) : std::nullopt;
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(kid)) {
      simd::gemm<T>(false, true, cout, rows, n_out, go.data(), cols->data(),
                    g.accumulate_grad(kid).data(), true);
    }
    if (bid && g.requires_grad(*bid)) {
      Tensor<T>& gb = g.accumulate_grad(*bid);
      for (std::size_t co = 0; co < cout; ++co) {
        T s = 0;
        const T* grow = go.data() + co * n_out;
        for (std::size_t t = 0; t < n_out; ++t) s += grow[t];
        gb[co] += s;
      }
    }
    if (g.requires_grad(xid)) {
      std::vector<T> gcols(rows * n_out);
      simd::gemm<T>(true, false, rows, n_out, cout, g.value(kid).data(), go.data(), gcols.data(),
                    false);
      Tensor<T>& gx = g.accumulate_grad(xid);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        T* gxrow = gx.data() + ci * n_in;
        for (std::size_t w = 0; w < width; ++w) {
          const T* crow = gcols.data() + (ci * width + w) * n_out;
          for (std::size_t s = 0; s < in_len.size(); ++s) {
            T* dst = gxrow + in_off[s];
            const T* src = crow + out_off[s];
            const long L = static_cast<long>(in_len[s]);
            for (std::size_t t = 0; t < out_len[s]; ++t) {
              const long pos = static_cast<long>(t * stride + w) - static_cast<long>(pad);
              if (pos >= 0 && pos < L) dst[pos] += src[t];
            }
          }
        }
      }
    }
  };
  return x.graph()->record(std::move(out), inputs, fn, out_len);
}

template <typename T>
Var<T> relu(Var<T> x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  const std::size_t xid = x.id();
  auto fn = [xid](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& xv = g.value(xid);
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > T(0)) gx[i] += go[i];
  };
  return x.graph()->record(std::move(out), {x}, fn, x.segments());
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.shape() != bv.shape())
    throw std::invalid_argument("add: shape mismatch " + shape_str(av.shape()) + " vs " +
                                shape_str(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  auto fn = [aid, bid](Graph<T>& g, const Tensor<T>& go) {
    for (std::size_t id : {aid, bid}) {
      if (!g.requires_grad(id)) continue;
      Tensor<T>& gi = g.accumulate_grad(id);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
    }
  };
  return a.graph()->record(std::move(out), {a, b}, fn, a.segments());
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  const std::size_t xid = x.id();
  auto fn = [xid, factor](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * factor;
  };
  return x.graph()->record(std::move(out), {x}, fn, x.segments());
}

template <typename T>
Var<T> batchnorm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormStats<T>& stats, Mode mode,
                 T momentum, T eps) {
  const Tensor<T>& xv = x.value();
  require_rank(xv.shape(), 2, "batchnorm", "input");
  const std::size_t c = xv.dim(0), n = xv.dim(1);
  if (n == 0) throw std::invalid_argument("batchnorm: empty time axis");
  if (gamma.value().size() != c || beta.value().size() != c ||
      stats.running_mean.size() != c || stats.running_var.size() != c)
    throw std::invalid_argument("batchnorm: channel dimension mismatch (" + std::to_string(c) +
                                " channels)");
  auto inv_std = std::make_shared<std::vector<T>>(c);
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> out(xv.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* row = xv.data() + ch * n;
    T mean, var;
    if (mode == Mode::kTrain) {
      double s = 0;
      for (std::size_t t = 0; t < n; ++t) s += row[t];
      const double m = s / static_cast<double>(n);
      double ss = 0;
      for (std::size_t t = 0; t < n; ++t) ss += (row[t] - m) * (row[t] - m);
      mean = static_cast<T>(m);
      var = static_cast<T>(ss / static_cast<double>(n));
      const double unbiased = n > 1 ? ss / static_cast<double>(n - 1) : ss;
      stats.running_mean[ch] = (T(1) - momentum) * stats.running_mean[ch] + momentum * mean;
      stats.running_var[ch] =
          (T(1) - momentum) * stats.running_var[ch] + momentum * static_cast<T>(unbiased);
    } else {
      mean = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[ch] = is;
    T* xh = xhat->data() + ch * n;
    T* orow = out.data() + ch * n;
    for (std::size_t t = 0; t < n; ++t) {
      xh[t] = (row[t] - mean) * is;
      orow[t] = gv[ch] * xh[t] + bv[ch];
    }
  }
  const std::size_t xid = x.id(), gid = gamma.id(), bid = beta.id();
  const bool train = mode == Mode::kTrain;
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& gam = g.value(gid);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* grow = go.data() + ch * n;
      const T* xh = xhat->data() + ch * n;
      T sg = 0, sgx = 0;
      for (std::size_t t = 0; t < n; ++t) {
        sg += grow[t];
        sgx += grow[t] * xh[t];
      }
      if (g.requires_grad(gid)) g.accumulate_grad(gid)[ch] += sgx;
      if (g.requires_grad(bid)) g.accumulate_grad(bid)[ch] += sg;
      if (!g.requires_grad(xid)) continue;
      T* gx = g.accumulate_grad(xid).data() + ch * n;
      const T k = gam[ch] * (*inv_std)[ch];
      if (train) {
        const T mg = sg / static_cast<T>(n), mgx = sgx / static_cast<T>(n);
        for (std::size_t t = 0; t < n; ++t) gx[t] += k * (grow[t] - mg - xh[t] * mgx);
      } else {
        for (std::size_t t = 0; t < n; ++t) gx[t] += k * grow[t];
      }
    }
  };
  return x.graph()->record(std::move(out), {x, gamma, beta}, fn, x.segments());
}

template <typename T>
Var<T> mean_pool_time(Var<T> x) {
  const Tensor<T>& xv = x.value();
  require_rank(xv.shape(), 2, "mean_pool_time", "input");
  const std::vector<std::size_t> len = x.segments();
  const auto off = offsets_of(len);
  const std::size_t c = xv.dim(0), n = xv.dim(1), b = len.size();
  if (n == 0 || b == 0) throw std::invalid_argument("mean_pool_time: empty time axis");
  for (std::size_t L : len)
    if (L == 0) throw std::invalid_argument("mean_pool_time: empty time axis in a segment");
  Tensor<T> out({c, b});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t s = 0; s < b; ++s) {
      T acc = 0;
      for (std::size_t t = off[s]; t < off[s + 1]; ++t) acc += xv(ch, t);
      out(ch, s) = acc / static_cast<T>(len[s]);
    }
  const std::size_t xid = x.id();
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < b; ++s) {
        const T share = go(ch, s) / static_cast<T>(len[s]);
        for (std::size_t t = off[s]; t < off[s + 1]; ++t) gx(ch, t) += share;
      }
  };
  return x.graph()->record(std::move(out), {x}, fn);
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_rank(av.shape(), 2, "matmul", "left operand");
  require_rank(bv.shape(), 2, "matmul", "right operand");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k)
    throw std::invalid_argument("matmul: inner dimension mismatch " + shape_str(av.shape()) +
                                " x " + shape_str(bv.shape()));
  Tensor<T> out({m, n});
  simd::kernels<T>().gemm(m, n, k, av.data(), bv.data(), out.data(), false);
  const std::size_t aid = a.id(), bid = b.id();
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(aid))
      simd::gemm<T>(false, true, m, k, n, go.data(), g.value(bid).data(),
                    g.accumulate_grad(aid).data(), true);
    if (g.requires_grad(bid))
      simd::gemm<T>(true, false, k, n, m, g.value(aid).data(), go.data(),
                    g.accumulate_grad(bid).data(), true);
  };
  return a.graph()->record(std::move(out), {a, b}, fn);
}

template <typename T>
Var<T> transpose(Var<T> x) {
  const Tensor<T>& xv = x.value();
  require_rank(xv.shape(), 2, "transpose", "input");
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  Tensor<T> out({c, r});
  simd::transpose(r, c, xv.data(), out.data());
  const std::size_t xid = x.id();
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    std::vector<T> back(r * c);
    simd::transpose(c, r, go.data(), back.data());
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
  };
  return x.graph()->record(std::move(out), {x}, fn);
}

template <typename T>
Var<T> dot(Var<T> u, Var<T> v) {
  const Tensor<T>& uv = u.value();
  const Tensor<T>& vv = v.value();
  if (uv.size() != vv.size())
    throw std::invalid_argument("dot: size mismatch " + shape_str(uv.shape()) + " vs " +
                                shape_str(vv.shape()));
  T s = 0;
  for (std::size_t i = 0; i < uv.size(); ++i) s += uv[i] * vv[i];
  const std::size_t uid = u.id(), vid = v.id();
  auto fn = [uid, vid](Graph<T>& g, const Tensor<T>& go) {
    const T gs = go[0];
    // Read both values before touching either gradient (u and v may alias).
    const Tensor<T>& uv = g.value(uid);
    const Tensor<T>& vv = g.value(vid);
    if (g.requires_grad(uid)) {
      Tensor<T>& gu = g.accumulate_grad(uid);
      for (std::size_t i = 0; i < gu.size(); ++i) gu[i] += gs * vv[i];
    }
    if (g.requires_grad(vid)) {
      Tensor<T>& gv = g.accumulate_grad(vid);
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += gs * uv[i];
    }
  };
  return u.graph()->record(Tensor<T>({1}, s), {u, v}, fn);
}

template <typename T>
Var<T> sum(Var<T> x) {
  const Tensor<T>& xv = x.value();
  T s = 0;
  for (T v : xv.values()) s += v;
  const std::size_t xid = x.id();
  auto fn = [xid](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[0];
  };
  return x.graph()->record(Tensor<T>({1}, s), {x}, fn);
}

template <typename T>
Var<T> add_col_bias(Var<T> x, Var<T> bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  require_rank(xv.shape(), 2, "add_col_bias", "input");
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  if (bv.size() != r)
    throw std::invalid_argument("add_col_bias: bias dimension " + std::to_string(bv.size()) +
                                " does not match rows " + std::to_string(r));
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = xv(i, j) + bv[i];
  const std::size_t xid = x.id(), bid = bias.id();
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(xid)) {
      Tensor<T>& gx = g.accumulate_grad(xid);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
    if (g.requires_grad(bid)) {
      Tensor<T>& gb = g.accumulate_grad(bid);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[i] += go(i, j);
    }
  };
  return x.graph()->record(std::move(out), {x, bias}, fn, x.segments());
}

template <typename T>
Var<T> gather_columns(Var<T> x, const std::vector<std::size_t>& index) {
  const Tensor<T>& xv = x.value();
  require_rank(xv.shape(), 2, "gather_columns", "input");
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  if (index.size() != c)
    throw std::invalid_argument("gather_columns: index length " + std::to_string(index.size()) +
                                " does not match " + std::to_string(c) + " columns");
  Tensor<T> out(xv.shape());
  for (std::size_t j = 0; j < c; ++j) {
    if (index[j] >= c) throw std::out_of_range("gather_columns: column index out of range");
    for (std::size_t i = 0; i < r; ++i) out(i, j) = xv(i, index[j]);
  }
  const std::size_t xid = x.id();
  auto fn = [=](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 0; i < r; ++i) gx(i, index[j]) += go(i, j);
  };
  return x.graph()->record(std::move(out), {x}, fn, x.segments());
}

template <typename T>
Var<T> straight_through(Var<T> x, Tensor<T> replacement) {
  if (replacement.shape() != x.value().shape())
    throw std::invalid_argument("straight_through: replacement shape " +
                                shape_str(replacement.shape()) + " differs from input " +
                                shape_str(x.value().shape()));
  const std::size_t xid = x.id();
  auto fn = [xid](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gx = g.accumulate_grad(xid);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  };
  return x.graph()->record(std::move(replacement), {x}, fn, x.segments());
}

template <typename T>
std::vector<Tensor<T>> split_segments(const Tensor<T>& packed,
                                      const std::vector<std::size_t>& lengths) {
  require_rank(packed.shape(), 2, "split_segments", "input");
  const auto off = offsets_of(lengths);
  if (off.back() != packed.dim(1))
    throw std::invalid_argument("split_segments: lengths do not cover the frame axis");
  const std::size_t r = packed.dim(0);
  std::vector<Tensor<T>> out;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    Tensor<T> part({r, lengths[s]});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t t = 0; t < lengths[s]; ++t) part(i, t) = packed(i, off[s] + t);
    out.push_back(std::move(part));
  }
  return out;
}

#define RDVQ_INSTANTIATE_OPS(T)                                                               \
  template Var<T> conv1d<T>(Var<T>, Var<T>, std::optional<Var<T>>, std::size_t, std::size_t); \
  template Var<T> relu<T>(Var<T>);                                                            \
  template Var<T> add<T>(Var<T>, Var<T>);                                                     \
  template Var<T> scale<T>(Var<T>, T);                                                        \
  template Var<T> batchnorm<T>(Var<T>, Var<T>, Var<T>, BatchNormStats<T>&, Mode, T, T);       \
  template Var<T> mean_pool_time<T>(Var<T>);                                                  \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                                  \
  template Var<T> transpose<T>(Var<T>);                                                       \
  template Var<T> dot<T>(Var<T>, Var<T>);                                                     \
  template Var<T> sum<T>(Var<T>);                                                             \
  template Var<T> add_col_bias<T>(Var<T>, Var<T>);                                            \
  template Var<T> gather_columns<T>(Var<T>, const std::vector<std::size_t>&);                 \
  template Var<T> straight_through<T>(Var<T>, Tensor<T>);                                     \
  template std::vector<Tensor<T>> split_segments<T>(const Tensor<T>&,                         \
                                                    const std::vector<std::size_t>&);

RDVQ_INSTANTIATE_OPS(float)
RDVQ_INSTANTIATE_OPS(double)

}  // namespace rdvq
