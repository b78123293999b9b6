#pragma once

#include <array>
#include <span>

#include "vlab/ops.hpp"

namespace vlab {

enum class Mode { Train, Eval };

template <typename T>
inline void check_finite(const TensorT<T>& t, const std::string& where) {
  const T* d = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i)
    if (!std::isfinite(double(d[i])))
      fail(ErrorKind::Numeric, "non-finite value at " + where);
}

// ---- Conv3d -------------------------------------------------------------------

template <typename T>
struct Conv3dT {
  TensorT<T> weight;  // [out_ch, in_ch, kt, kh, kw]
  TensorT<T> bias;    // [out_ch], may be undefined
  std::array<int64_t, 3> stride{1, 1, 1};
  std::array<int64_t, 3> padding{0, 0, 0};

  int64_t out_channels() const { return weight.shape()[0]; }
  int64_t in_channels() const { return weight.shape()[1]; }
  std::array<int64_t, 3> kernel() const { return {weight.shape()[2], weight.shape()[3], weight.shape()[4]}; }

  static Conv3dT make(int64_t in_ch, int64_t out_ch, std::array<int64_t, 3> kernel,
                      std::array<int64_t, 3> stride, std::array<int64_t, 3> padding, bool with_bias,
                      const Rng& rng) {
    Conv3dT c;
    const int64_t fan_in = in_ch * kernel[0] * kernel[1] * kernel[2];
    c.weight = kaiming_uniform<T>({out_ch, in_ch, kernel[0], kernel[1], kernel[2]}, rng, fan_in);
    c.weight.set_requires_grad(true);
    if (with_bias) {
      c.bias = zeros<T>({out_ch});
      c.bias.set_requires_grad(true);
    }
    c.stride = stride;
    c.padding = padding;
    return c;
  }
};

/// floor((in + 2p - k) / s) + 1 per axis; fails when any extent drops below 1.
template <typename T>
inline std::array<int64_t, 3> conv3d_out_extents(const Shape& x_shape, const Conv3dT<T>& layer) {
  auto k = layer.kernel();
  std::array<int64_t, 3> out;
  for (int i = 0; i < 3; ++i) {
    const int64_t in = x_shape[size_t(2 + i)];
    out[size_t(i)] = (in + 2 * layer.padding[size_t(i)] - k[size_t(i)]) / layer.stride[size_t(i)] + 1;
    if (out[size_t(i)] < 1)
      fail(ErrorKind::Geometry, "conv3d output extent < 1 for input " + shape_str(x_shape));
  }
  return out;
}

namespace detail {

// Valid output range along one axis for a fixed kernel offset:
// o in [lo, hi) such that o*s - p + k lies inside [0, in).
inline void conv_axis_bounds(int64_t in, int64_t out, int64_t s, int64_t p, int64_t k, int64_t& lo,
                             int64_t& hi) {
  int64_t shift = p - k;
  lo = shift <= 0 ? 0 : (shift + s - 1) / s;
  int64_t bound = in - 1 + shift;  // o*s <= bound
  hi = bound < 0 ? 0 : std::min(out, bound / s + 1);
  if (lo > hi) lo = hi;
}

}  // namespace detail

template <typename T>
TensorT<T> conv3d_forward(const TensorT<T>& x, const Conv3dT<T>& layer) {
  if (x.rank() != 5) fail(ErrorKind::Rank, "conv3d input must be rank 5, got " + shape_str(x.shape()));
  if (x.shape()[1] != layer.in_channels())
    fail(ErrorKind::Shape, "conv3d channel mismatch: input " + shape_str(x.shape()) + " vs weight " +
                               shape_str(layer.weight.shape()));
  const auto oext = conv3d_out_extents(x.shape(), layer);
  const int64_t N = x.shape()[0], C = x.shape()[1], iT = x.shape()[2], iH = x.shape()[3], iW = x.shape()[4];
  const int64_t OC = layer.out_channels();
  const auto k = layer.kernel();
  const auto [st, sh, sw] = layer.stride;
  const auto [pt, ph, pw] = layer.padding;
  const int64_t oT = oext[0], oH = oext[1], oW = oext[2];

  TensorT<T> out({N, OC, oT, oH, oW});
  const T* px = x.data();
  const T* pwgt = layer.weight.data();
  const T* pb = layer.bias.defined() ? layer.bias.data() : nullptr;
  T* po = out.data();

#pragma omp parallel for schedule(static) collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oc = 0; oc < OC; ++oc) {
      const T bias_v = pb ? pb[oc] : T(0);
      for (int64_t ot = 0; ot < oT; ++ot) {
        for (int64_t oh = 0; oh < oH; ++oh) {
          T* orow = po + (((n * OC + oc) * oT + ot) * oH + oh) * oW;
          for (int64_t ow = 0; ow < oW; ++ow) orow[ow] = bias_v;
          for (int64_t ic = 0; ic < C; ++ic) {
            for (int64_t kt = 0; kt < k[0]; ++kt) {
              const int64_t it = ot * st - pt + kt;
              if (it < 0 || it >= iT) continue;
              for (int64_t kh = 0; kh < k[1]; ++kh) {
                const int64_t ih = oh * sh - ph + kh;
                if (ih < 0 || ih >= iH) continue;
                const T* xrow = px + (((n * C + ic) * iT + it) * iH + ih) * iW;
                const T* wrow = pwgt + (((oc * C + ic) * k[0] + kt) * k[1] + kh) * k[2];
                for (int64_t kw = 0; kw < k[2]; ++kw) {
                  int64_t lo, hi;
                  detail::conv_axis_bounds(iW, oW, sw, pw, kw, lo, hi);
                  const T wv = wrow[kw];
                  int64_t iw = lo * sw - pw + kw;
                  for (int64_t ow = lo; ow < hi; ++ow, iw += sw) orow[ow] += wv * xrow[iw];
                }
              }
            }
          }
        }
      }
    }
  }

  const TensorT<T>& w = layer.weight;
  const TensorT<T>& b = layer.bias;
  bool tape_needed = b.defined() ? needs_tape<T>({&x, &w, &b}) : needs_tape<T>({&x, &w});
  if (tape_needed) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.defined() ? b.impl() : nullptr;
    std::vector<std::shared_ptr<TensorImplT<T>>> parents{xi, wi};
    if (bi) parents.push_back(bi);
    auto kk = k;
    auto strd = layer.stride;
    auto padd = layer.padding;
    TapeT<T>::active()->record(parents, out, [=](const typename TapeT<T>::Node& nd) {
      const std::vector<T>& go = nd.out->grad;
      ensure_grad_buffer(*xi);
      ensure_grad_buffer(*wi);
      if (bi) ensure_grad_buffer(*bi);
      const T* vx = xi->data->data();
      const T* vw = wi->data->data();
      T* gx = xi->grad.data();
      T* gw = wi->grad.data();
      const auto [st2, sh2, sw2] = strd;
      const auto [pt2, ph2, pw2] = padd;

      if (bi) {
        T* gb = bi->grad.data();
#pragma omp parallel for schedule(static)
        for (int64_t oc = 0; oc < OC; ++oc) {
          T acc = T(0);
          for (int64_t n = 0; n < N; ++n) {
            const T* slab = go.data() + ((n * OC + oc) * oT) * oH * oW;
            for (int64_t i = 0; i < oT * oH * oW; ++i) acc += slab[i];
          }
          gb[oc] += acc;
        }
      }

      // weight gradient: one (oc, ic) pair per task
#pragma omp parallel for schedule(static) collapse(2)
      for (int64_t oc = 0; oc < OC; ++oc) {
        for (int64_t ic = 0; ic < C; ++ic) {
          for (int64_t kt = 0; kt < kk[0]; ++kt) {
            for (int64_t kh = 0; kh < kk[1]; ++kh) {
              for (int64_t kw = 0; kw < kk[2]; ++kw) {
                int64_t wlo, whi;
                detail::conv_axis_bounds(iW, oW, sw2, pw2, kw, wlo, whi);
                T acc = T(0);
                for (int64_t n = 0; n < N; ++n) {
                  for (int64_t ot = 0; ot < oT; ++ot) {
                    const int64_t it = ot * st2 - pt2 + kt;
                    if (it < 0 || it >= iT) continue;
                    for (int64_t oh = 0; oh < oH; ++oh) {
                      const int64_t ih = oh * sh2 - ph2 + kh;
                      if (ih < 0 || ih >= iH) continue;
                      const T* grow = go.data() + (((n * OC + oc) * oT + ot) * oH + oh) * oW;
                      const T* xrow = vx + (((n * C + ic) * iT + it) * iH + ih) * iW;
                      int64_t iw = wlo * sw2 - pw2 + kw;
                      for (int64_t ow = wlo; ow < whi; ++ow, iw += sw2) acc += grow[ow] * xrow[iw];
                    }
                  }
                }
                gw[(((oc * C + ic) * kk[0] + kt) * kk[1] + kh) * kk[2] + kw] += acc;
              }
            }
          }
        }
      }

      // input gradient: scatter within a (n, ic) slab owned by one task
#pragma omp parallel for schedule(static) collapse(2)
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t ic = 0; ic < C; ++ic) {
          T* gxs = gx + ((n * C + ic) * iT) * iH * iW;
          for (int64_t oc = 0; oc < OC; ++oc) {
            for (int64_t kt = 0; kt < kk[0]; ++kt) {
              for (int64_t kh = 0; kh < kk[1]; ++kh) {
                for (int64_t kw = 0; kw < kk[2]; ++kw) {
                  int64_t wlo, whi;
                  detail::conv_axis_bounds(iW, oW, sw2, pw2, kw, wlo, whi);
                  const T wv = vw[(((oc * C + ic) * kk[0] + kt) * kk[1] + kh) * kk[2] + kw];
                  for (int64_t ot = 0; ot < oT; ++ot) {
                    const int64_t it = ot * st2 - pt2 + kt;
                    if (it < 0 || it >= iT) continue;
                    for (int64_t oh = 0; oh < oH; ++oh) {
                      const int64_t ih = oh * sh2 - ph2 + kh;
                      if (ih < 0 || ih >= iH) continue;
                      const T* grow = go.data() + (((n * OC + oc) * oT + ot) * oH + oh) * oW;
                      T* xrow = gxs + (it * iH + ih) * iW;
                      int64_t iw = wlo * sw2 - pw2 + kw;
                      for (int64_t ow = wlo; ow < whi; ++ow, iw += sw2) xrow[iw] += wv * grow[ow];
                    }
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- BatchNorm3d ----------------------------------------------------------------

template <typename T>
struct BatchNorm3dT {
  TensorT<T> scale, shift;               // learnable [C]
  TensorT<T> running_mean, running_var;  // state [C]
  T eps = T(1e-5);
  T momentum = T(0.1);

  int64_t channels() const { return scale.shape()[0]; }

  static BatchNorm3dT make(int64_t channels, T eps = T(1e-5), T momentum = T(0.1)) {
    BatchNorm3dT bn;
    bn.scale = ones<T>({channels});
    bn.scale.set_requires_grad(true);
    bn.shift = zeros<T>({channels});
    bn.shift.set_requires_grad(true);
    bn.running_mean = zeros<T>({channels});
    bn.running_var = ones<T>({channels});
    bn.eps = eps;
    bn.momentum = momentum;
    return bn;
  }
};

template <typename T>
TensorT<T> batchnorm3d_forward(const TensorT<T>& x, BatchNorm3dT<T>& layer, Mode mode) {
  if (x.rank() != 5) fail(ErrorKind::Rank, "batchnorm3d input must be rank 5");
  const int64_t N = x.shape()[0], C = x.shape()[1];
  if (C != layer.channels()) fail(ErrorKind::Shape, "batchnorm3d channel mismatch");
  const int64_t spatial = x.shape()[2] * x.shape()[3] * x.shape()[4];
  const int64_t count = N * spatial;

  auto mean = std::make_shared<std::vector<T>>(size_t(C));
  auto invstd = std::make_shared<std::vector<T>>(size_t(C));
  const T* px = x.data();

  if (mode == Mode::Train) {
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < C; ++c) {
      double sum = 0.0, sumsq = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const T* slab = px + (n * C + c) * spatial;
        for (int64_t i = 0; i < spatial; ++i) {
          sum += double(slab[i]);
          sumsq += double(slab[i]) * double(slab[i]);
        }
      }
      const double m = sum / double(count);
      const double var = std::max(0.0, sumsq / double(count) - m * m);
      (*mean)[size_t(c)] = T(m);
      (*invstd)[size_t(c)] = T(1.0 / std::sqrt(var + double(layer.eps)));
      // running stats use the unbiased variance
      const double unbiased = count > 1 ? var * double(count) / double(count - 1) : var;
      T* rm = layer.running_mean.data();
      T* rv = layer.running_var.data();
      rm[c] = T((1.0 - double(layer.momentum)) * double(rm[c]) + double(layer.momentum) * m);
      rv[c] = T((1.0 - double(layer.momentum)) * double(rv[c]) + double(layer.momentum) * unbiased);
    }
  } else {
    const T* rm = layer.running_mean.data();
    const T* rv = layer.running_var.data();
    for (int64_t c = 0; c < C; ++c) {
      (*mean)[size_t(c)] = rm[c];
      (*invstd)[size_t(c)] = T(1.0 / std::sqrt(double(rv[c]) + double(layer.eps)));
    }
  }

  TensorT<T> out(x.shape());
  T* po = out.data();
  const T* sc = layer.scale.data();
  const T* sh = layer.shift.data();
#pragma omp parallel for schedule(static) collapse(2)
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T m = (*mean)[size_t(c)], is = (*invstd)[size_t(c)], g = sc[c], b = sh[c];
      const T* xi = px + (n * C + c) * spatial;
      T* oi = po + (n * C + c) * spatial;
      for (int64_t i = 0; i < spatial; ++i) oi[i] = (xi[i] - m) * is * g + b;
    }
  }

  const TensorT<T>& scale_t = layer.scale;
  const TensorT<T>& shift_t = layer.shift;
  if (needs_tape<T>({&x, &scale_t, &shift_t})) {
    auto xi = x.impl();
    auto si = scale_t.impl();
    auto bi = shift_t.impl();
    const bool train = mode == Mode::Train;
    TapeT<T>::active()->record(
        {xi, si, bi}, out, [=](const typename TapeT<T>::Node& nd) {
          const std::vector<T>& go = nd.out->grad;
          ensure_grad_buffer(*xi);
          ensure_grad_buffer(*si);
          ensure_grad_buffer(*bi);
          const T* vx = xi->data->data();
          const T* vs = si->data->data();
          T* gx = xi->grad.data();
          T* gs = si->grad.data();
          T* gb = bi->grad.data();
#pragma omp parallel for schedule(static)
          for (int64_t c = 0; c < C; ++c) {
            const T m = (*mean)[size_t(c)], is = (*invstd)[size_t(c)], g = vs[c];
            double dsum = 0.0, dxhat_sum = 0.0;
            for (int64_t n = 0; n < N; ++n) {
              const T* gr = go.data() + (n * C + c) * spatial;
              const T* xr = vx + (n * C + c) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                dsum += double(gr[i]);
                dxhat_sum += double(gr[i]) * double((xr[i] - m) * is);
              }
            }
            gb[c] += T(dsum);
            gs[c] += T(dxhat_sum);
            if (train) {
              const T mean_dy = T(dsum / double(count));
              const T mean_dy_xhat = T(dxhat_sum / double(count));
              for (int64_t n = 0; n < N; ++n) {
                const T* gr = go.data() + (n * C + c) * spatial;
                const T* xr = vx + (n * C + c) * spatial;
                T* gxr = gx + (n * C + c) * spatial;
                for (int64_t i = 0; i < spatial; ++i) {
                  const T xhat = (xr[i] - m) * is;
                  gxr[i] += g * is * (gr[i] - mean_dy - xhat * mean_dy_xhat);
                }
              }
            } else {
              for (int64_t n = 0; n < N; ++n) {
                const T* gr = go.data() + (n * C + c) * spatial;
                T* gxr = gx + (n * C + c) * spatial;
                for (int64_t i = 0; i < spatial; ++i) gxr[i] += g * is * gr[i];
              }
            }
          }
        });
  }
  return out;
}

// ---- Linear ---------------------------------------------------------------------

template <typename T>
struct LinearT {
  TensorT<T> weight;  // [out, in]
  TensorT<T> bias;    // [out]

  int64_t in_features() const { return weight.shape()[1]; }
  int64_t out_features() const { return weight.shape()[0]; }

  static LinearT make(int64_t in, int64_t out, const Rng& rng) {
    LinearT l;
    l.weight = kaiming_uniform<T>({out, in}, rng, in);
    l.weight.set_requires_grad(true);
    l.bias = zeros<T>({out});
    l.bias.set_requires_grad(true);
    return l;
  }
};

/// x[..., in] -> x . W^T + b, leading axes treated as batch.
template <typename T>
TensorT<T> linear_forward(const TensorT<T>& x, const LinearT<T>& layer) {
  if (x.rank() < 1 || x.shape().back() != layer.in_features())
    fail(ErrorKind::Shape, "linear expects trailing extent " + std::to_string(layer.in_features()) +
                               ", got " + shape_str(x.shape()));
  const int64_t in = layer.in_features(), out_f = layer.out_features();
  const int64_t rows = x.numel() / in;
  Shape os = x.shape();
  os.back() = out_f;

  TensorT<T> out(os);
  const T* px = x.data();
  const T* pw = layer.weight.data();
  const T* pb = layer.bias.data();
  T* po = out.data();
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = px + r * in;
    T* orow = po + r * out_f;
    for (int64_t o = 0; o < out_f; ++o) {
      const T* wr = pw + o * in;
      T acc = pb[o];
      for (int64_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      orow[o] = acc;
    }
  }

  const TensorT<T>& w = layer.weight;
  const TensorT<T>& b = layer.bias;
  if (needs_tape<T>({&x, &w, &b})) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.impl();
    TapeT<T>::active()->record({xi, wi, bi}, out, [=](const typename TapeT<T>::Node& nd) {
      const std::vector<T>& go = nd.out->grad;
      ensure_grad_buffer(*xi);
      ensure_grad_buffer(*wi);
      ensure_grad_buffer(*bi);
      const T* vx = xi->data->data();
      const T* vw = wi->data->data();
      T* gx = xi->grad.data();
      T* gw = wi->grad.data();
      T* gb = bi->grad.data();
      // dx = dY . W
      detail::gemm_nn(go.data(), vw, gx, rows, out_f, in);
      // dW = dY^T . X
      detail::gemm_tn(go.data(), vx, gw, rows, out_f, in);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t o = 0; o < out_f; ++o) gb[o] += go[size_t(r * out_f + o)];
    });
  }
  return out;
}

// ---- Dropout --------------------------------------------------------------------

template <typename T>
struct DropoutT {
  T p = T(0.4);
};

/// Train mode zeroes each element with probability p and scales survivors by
/// 1/(1-p); eval mode is the identity. The mask is indexed from the given
/// stream, so a fixed stream reproduces the mask.
template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& x, T p, Mode mode, const Rng& rng) {
  if (!(p >= T(0) && p < T(1))) fail(ErrorKind::Config, "dropout p must be in [0,1)");
  if (mode == Mode::Eval || p == T(0)) return x;

  const int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<T>>(size_t(n));
  const T keep_scale = T(1) / (T(1) - p);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    (*mask)[size_t(i)] = rng.float_at(uint64_t(i)) < float(p) ? T(0) : keep_scale;

  TensorT<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] * (*mask)[size_t(i)];

  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    TapeT<T>::active()->record({xi}, out, [xi, mask](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (*mask)[i];
    });
  }
  return out;
}

// ---- classifier head --------------------------------------------------------------

/// Global average over (T,H,W), dropout, then the fully connected layer.
template <typename T>
TensorT<T> pool_linear_dropout(const TensorT<T>& x, const LinearT<T>& fc, T dropout_p, Mode mode,
                               const Rng& rng) {
  if (x.rank() != 5) fail(ErrorKind::Rank, "classifier head expects rank-5 features");
  if (x.shape()[1] != fc.in_features())
    fail(ErrorKind::Shape, "classifier head channel mismatch: features " + shape_str(x.shape()) +
                               " vs fc in=" + std::to_string(fc.in_features()));
  TensorT<T> pooled = reduce_mean(x, {2, 3, 4});
  TensorT<T> dropped = dropout_forward(pooled, dropout_p, mode, rng);
  return linear_forward(dropped, fc);
}

// ---- cross entropy ----------------------------------------------------------------

/// Mean over the batch of -log softmax(logits)[label], in log-sum-exp form.
template <typename T>
TensorT<T> cross_entropy(const TensorT<T>& logits, std::span<const int64_t> labels) {
  if (logits.rank() != 2) fail(ErrorKind::Rank, "cross_entropy expects [N,K] logits");
  const int64_t N = logits.shape()[0], K = logits.shape()[1];
  if (int64_t(labels.size()) != N) fail(ErrorKind::Label, "label count does not match batch");
  for (int64_t i = 0; i < N; ++i)
    if (labels[size_t(i)] < 0 || labels[size_t(i)] >= K)
      fail(ErrorKind::Label, "label " + std::to_string(labels[size_t(i)]) + " out of range [0," +
                                 std::to_string(K) + ")");

  const T* pl = logits.data();
  auto lse = std::make_shared<std::vector<T>>(size_t(N));
  auto mx = std::make_shared<std::vector<T>>(size_t(N));
  T loss_sum = T(0);
  for (int64_t i = 0; i < N; ++i) {
    const T* row = pl + i * K;
    T m = row[0];
    for (int64_t j = 1; j < K; ++j) m = std::max(m, row[j]);
    T s = T(0);
    for (int64_t j = 0; j < K; ++j) s += std::exp(row[j] - m);
    (*mx)[size_t(i)] = m;
    (*lse)[size_t(i)] = m + std::log(s);
    loss_sum += (*lse)[size_t(i)] - row[labels[size_t(i)]];
  }
  TensorT<T> out(Shape{});
  out.data()[0] = loss_sum / T(N);

  if (needs_tape<T>({&logits})) {
    auto li = logits.impl();
    std::vector<int64_t> lab(labels.begin(), labels.end());
    TapeT<T>::active()->record({li}, out, [li, lab, lse, mx, N, K](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*li);
      const T g = nd.out->grad[0];
      const T* vl = li->data->data();
      T* gl = li->grad.data();
      for (int64_t i = 0; i < N; ++i) {
        const T* row = vl + i * K;
        T* grow = gl + i * K;
        for (int64_t j = 0; j < K; ++j) {
          const T softmax_j = std::exp(row[j] - (*lse)[size_t(i)]);
          const T onehot = j == lab[size_t(i)] ? T(1) : T(0);
          grow[j] += g * (softmax_j - onehot) / T(N);
        }
      }
    });
  }
  return out;
}

// ---- causal temporal convolution ---------------------------------------------------

template <typename T>
struct Conv1dCausalT {
  TensorT<T> weight;  // [out_ch, in_ch, k]
  TensorT<T> bias;    // [out_ch]

  int64_t kernel() const { return weight.shape()[2]; }
  int64_t left_pad() const { return kernel() - 1; }

  static Conv1dCausalT make(int64_t channels, int64_t k, const Rng& rng) {
    Conv1dCausalT c;
    c.weight = kaiming_uniform<T>({channels, channels, k}, rng, channels * k);
    c.weight.set_requires_grad(true);
    c.bias = zeros<T>({channels});
    c.bias.set_requires_grad(true);
    return c;
  }
};

/// x [B, C, L] -> same shape; output at time t reads inputs at times <= t only.
template <typename T>
TensorT<T> conv1d_causal_forward(const TensorT<T>& x, const Conv1dCausalT<T>& layer) {
  if (x.rank() != 3) fail(ErrorKind::Rank, "conv1d input must be rank 3");
  const int64_t B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
  if (C != layer.weight.shape()[1]) fail(ErrorKind::Shape, "conv1d channel mismatch");
  const int64_t OC = layer.weight.shape()[0], k = layer.kernel(), pad = layer.left_pad();

  TensorT<T> out({B, OC, L});
  const T* px = x.data();
  const T* pw = layer.weight.data();
  const T* pb = layer.bias.data();
  T* po = out.data();
#pragma omp parallel for schedule(static) collapse(2)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t oc = 0; oc < OC; ++oc) {
      T* orow = po + (b * OC + oc) * L;
      for (int64_t t = 0; t < L; ++t) orow[t] = pb[oc];
      for (int64_t ic = 0; ic < C; ++ic) {
        const T* xrow = px + (b * C + ic) * L;
        const T* wrow = pw + (oc * C + ic) * k;
        for (int64_t j = 0; j < k; ++j) {
          const T wv = wrow[j];
          const int64_t t0 = std::max<int64_t>(0, pad - j);
          for (int64_t t = t0; t < L; ++t) orow[t] += wv * xrow[t - pad + j];
        }
      }
    }
  }

  const TensorT<T>& w = layer.weight;
  const TensorT<T>& b = layer.bias;
  if (needs_tape<T>({&x, &w, &b})) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.impl();
    TapeT<T>::active()->record({xi, wi, bi}, out, [=](const typename TapeT<T>::Node& nd) {
      const std::vector<T>& go = nd.out->grad;
      ensure_grad_buffer(*xi);
      ensure_grad_buffer(*wi);
      ensure_grad_buffer(*bi);
      const T* vx = xi->data->data();
      const T* vw = wi->data->data();
      T* gx = xi->grad.data();
      T* gw = wi->grad.data();
      T* gb = bi->grad.data();
      for (int64_t b2 = 0; b2 < B; ++b2) {
        for (int64_t oc = 0; oc < OC; ++oc) {
          const T* grow = go.data() + (b2 * OC + oc) * L;
          for (int64_t t = 0; t < L; ++t) gb[oc] += grow[t];
          for (int64_t ic = 0; ic < C; ++ic) {
            const T* xrow = vx + (b2 * C + ic) * L;
            T* gxrow = gx + (b2 * C + ic) * L;
            const T* wrow = vw + (oc * C + ic) * k;
            T* gwrow = gw + (oc * C + ic) * k;
            for (int64_t j = 0; j < k; ++j) {
              const int64_t t0 = std::max<int64_t>(0, pad - j);
              T acc = T(0);
              for (int64_t t = t0; t < L; ++t) {
                acc += grow[t] * xrow[t - pad + j];
                gxrow[t - pad + j] += wrow[j] * grow[t];
              }
              gwrow[j] += acc;
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- (2+1)D factorization ----------------------------------------------------------

/// Intermediate channel count of a factorized (1,d,d)+(t,1,1) pair, chosen so
/// the pair's parameter count approximates the full (t,d,d) convolution.
inline int64_t midplanes(int64_t t, int64_t d, int64_t n_in, int64_t n_out) {
  if (t < 1 || d < 1 || n_in < 1 || n_out < 1) fail(ErrorKind::Shape, "midplanes arguments must be >= 1");
  return (t * d * d * n_in * n_out) / (d * d * n_in + t * n_out);
}

}  // namespace vlab
