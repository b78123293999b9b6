#pragma once

#include <optional>
#include <variant>

#include "vlab/layers.hpp"

namespace vlab {

// ---- squeeze and excitation --------------------------------------------------

template <typename T>
struct SEBlockT {
  LinearT<T> fc1;  // [C/r, C]
  LinearT<T> fc2;  // [C, C/r]
  int64_t channels = 0;
  int64_t reduction = 2;

  static SEBlockT make(int64_t channels, int64_t reduction, const Rng& rng) {
    if (channels % reduction != 0) fail(ErrorKind::Config, "SE reduction must divide channels");
    SEBlockT b;
    b.channels = channels;
    b.reduction = reduction;
    b.fc1 = LinearT<T>::make(channels, channels / reduction, rng.split(0));
    b.fc2 = LinearT<T>::make(channels / reduction, channels, rng.split(1));
    return b;
  }

  int64_t param_count() const {
    const int64_t cr = channels / reduction;
    return channels * cr + cr + cr * channels + channels;
  }
};

/// Squeeze to per-channel means, excite through the bottleneck MLP, gate the
/// input multiplicatively. Gate values lie in (0,1).
template <typename T>
TensorT<T> se_forward(const TensorT<T>& x, const SEBlockT<T>& blk) {
  if (x.rank() != 5 || x.shape()[1] != blk.channels)
    fail(ErrorKind::Shape, "SE channel mismatch: " + shape_str(x.shape()) + " vs C=" + std::to_string(blk.channels));
  TensorT<T> squeezed = reduce_mean(x, {2, 3, 4});  // [N,C]
  TensorT<T> gate = sigmoid(linear_forward(relu(linear_forward(squeezed, blk.fc1)), blk.fc2));
  TensorT<T> gate5 = reshape(gate, {x.shape()[0], x.shape()[1], 1, 1, 1});
  return mul(x, gate5);
}

// ---- CBAM ---------------------------------------------------------------------

template <typename T>
struct CBAMBlockT {
  TensorT<T> mlp1;  // [C, C/r], no bias
  TensorT<T> mlp2;  // [C/r, C], no bias
  Conv3dT<T> spatial;  // 2 -> 1 channels, kernel (kt,7,7), bias
  int64_t channels = 0;
  int64_t reduction = 16;

  static CBAMBlockT make(int64_t channels, int64_t reduction, const Rng& rng, int64_t time_kernel = 7) {
    if (channels % reduction != 0) fail(ErrorKind::Config, "CBAM reduction must divide channels");
    if (time_kernel != 7 && time_kernel != 1) fail(ErrorKind::Config, "CBAM time kernel must be 7 or 1");
    CBAMBlockT b;
    b.channels = channels;
    b.reduction = reduction;
    const int64_t cr = channels / reduction;
    b.mlp1 = kaiming_uniform<T>({channels, cr}, rng.split(0), channels);
    b.mlp1.set_requires_grad(true);
    b.mlp2 = kaiming_uniform<T>({cr, channels}, rng.split(1), cr);
    b.mlp2.set_requires_grad(true);
    b.spatial = Conv3dT<T>::make(2, 1, {time_kernel, 7, 7}, {1, 1, 1}, {time_kernel / 2, 3, 3}, true,
                                 rng.split(2));
    return b;
  }

  int64_t param_count() const {
    const int64_t cr = channels / reduction;
    auto k = spatial.kernel();
    return 2 * channels * cr + 2 * k[0] * k[1] * k[2] + 1;
  }
};

template <typename T>
TensorT<T> cbam_forward(const TensorT<T>& x, const CBAMBlockT<T>& blk) {
  if (x.rank() != 5 || x.shape()[1] != blk.channels)
    fail(ErrorKind::Shape, "CBAM channel mismatch: " + shape_str(x.shape()) + " vs C=" + std::to_string(blk.channels));
  const int64_t N = x.shape()[0], C = x.shape()[1];

  // channel attention: shared MLP over average- and max-pooled descriptors
  TensorT<T> avg = reduce_mean(x, {2, 3, 4});  // [N,C]
  TensorT<T> mx = reduce_max(x, {2, 3, 4});
  TensorT<T> ch = sigmoid(add(matmul(relu(matmul(avg, blk.mlp1)), blk.mlp2),
                              matmul(relu(matmul(mx, blk.mlp1)), blk.mlp2)));
  TensorT<T> gated = mul(x, reshape(ch, {N, C, 1, 1, 1}));

  // spatial attention: conv over stacked channel-mean / channel-max maps
  TensorT<T> cmean = reduce_mean(gated, {1}, /*keepdims=*/true);  // [N,1,T,H,W]
  TensorT<T> cmax = reduce_max(gated, {1}, /*keepdims=*/true);
  TensorT<T> sp = sigmoid(conv3d_forward(concat(cmean, cmax, 1), blk.spatial));  // [N,1,T,H,W]
  return mul(gated, sp);
}

// ---- layer norm (MHA option) ----------------------------------------------------

template <typename T>
struct LayerNormT {
  TensorT<T> scale, shift;  // [C]
  T eps = T(1e-5);

  static LayerNormT make(int64_t dim) {
    LayerNormT ln;
    ln.scale = ones<T>({dim});
    ln.scale.set_requires_grad(true);
    ln.shift = zeros<T>({dim});
    ln.shift.set_requires_grad(true);
    return ln;
  }
};

template <typename T>
TensorT<T> layernorm_forward(const TensorT<T>& x, const LayerNormT<T>& ln) {
  const int64_t C = ln.scale.shape()[0];
  if (x.shape().back() != C) fail(ErrorKind::Shape, "layernorm dim mismatch");
  const int64_t rows = x.numel() / C;

  auto mean = std::make_shared<std::vector<T>>(size_t(rows));
  auto invstd = std::make_shared<std::vector<T>>(size_t(rows));
  TensorT<T> out(x.shape());
  const T* px = x.data();
  const T* ps = ln.scale.data();
  const T* pb = ln.shift.data();
  T* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = px + r * C;
    double sum = 0, sumsq = 0;
    for (int64_t i = 0; i < C; ++i) {
      sum += double(xr[i]);
      sumsq += double(xr[i]) * double(xr[i]);
    }
    const double m = sum / double(C);
    const double var = std::max(0.0, sumsq / double(C) - m * m);
    (*mean)[size_t(r)] = T(m);
    (*invstd)[size_t(r)] = T(1.0 / std::sqrt(var + double(ln.eps)));
    T* orow = po + r * C;
    for (int64_t i = 0; i < C; ++i)
      orow[i] = (xr[i] - T(m)) * (*invstd)[size_t(r)] * ps[i] + pb[i];
  }

  const TensorT<T>& st = ln.scale;
  const TensorT<T>& sh = ln.shift;
  if (needs_tape<T>({&x, &st, &sh})) {
    auto xi = x.impl();
    auto si = st.impl();
    auto bi = sh.impl();
    TapeT<T>::active()->record({xi, si, bi}, out, [=](const typename TapeT<T>::Node& nd) {
      const std::vector<T>& go = nd.out->grad;
      ensure_grad_buffer(*xi);
      ensure_grad_buffer(*si);
      ensure_grad_buffer(*bi);
      const T* vx = xi->data->data();
      const T* vs = si->data->data();
      T* gx = xi->grad.data();
      T* gs = si->grad.data();
      T* gb = bi->grad.data();
      for (int64_t r = 0; r < rows; ++r) {
        const T m = (*mean)[size_t(r)], is = (*invstd)[size_t(r)];
        const T* xr = vx + r * C;
        const T* gr = go.data() + r * C;
        T dsum = T(0), dxhat_sum = T(0);
        for (int64_t i = 0; i < C; ++i) {
          const T xhat = (xr[i] - m) * is;
          gs[i] += gr[i] * xhat;
          gb[i] += gr[i];
          dsum += gr[i] * vs[i];
          dxhat_sum += gr[i] * vs[i] * xhat;
        }
        for (int64_t i = 0; i < C; ++i) {
          const T xhat = (xr[i] - m) * is;
          gx[r * C + i] += is * (gr[i] * vs[i] - dsum / T(C) - xhat * dxhat_sum / T(C));
        }
      }
    });
  }
  return out;
}

// ---- multi-head attention --------------------------------------------------------

enum class AttnAxis { Spatial, Temporal };

template <typename T>
struct MultiHeadAttnT {
  LinearT<T> q, k, v, o;
  int64_t dim = 0;
  int64_t heads = 4;
  AttnAxis axis = AttnAxis::Temporal;
  std::optional<LayerNormT<T>> pre_norm;
  bool posenc = false;

  static MultiHeadAttnT make(int64_t dim, int64_t heads, AttnAxis axis, const Rng& rng,
                             bool layernorm = false, bool posenc = false) {
    if (dim % heads != 0) fail(ErrorKind::Config, "heads must divide attention dim");
    MultiHeadAttnT b;
    b.dim = dim;
    b.heads = heads;
    b.axis = axis;
    b.q = LinearT<T>::make(dim, dim, rng.split(0));
    b.k = LinearT<T>::make(dim, dim, rng.split(1));
    b.v = LinearT<T>::make(dim, dim, rng.split(2));
    b.o = LinearT<T>::make(dim, dim, rng.split(3));
    if (layernorm) b.pre_norm = LayerNormT<T>::make(dim);
    b.posenc = posenc;
    return b;
  }

  int64_t param_count() const { return 4 * (dim * dim + dim) + (pre_norm ? 2 * dim : 0); }
};

namespace detail {

template <typename T>
TensorT<T> sinusoidal_posenc(int64_t tokens, int64_t dim) {
  TensorT<T> pe({tokens, dim});
  T* p = pe.data();
  for (int64_t s = 0; s < tokens; ++s)
    for (int64_t c = 0; c < dim; ++c) {
      const double rate = std::pow(10000.0, -double(c / 2 * 2) / double(dim));
      p[s * dim + c] = (c % 2 == 0) ? T(std::sin(double(s) * rate)) : T(std::cos(double(s) * rate));
    }
  return pe;
}

/// Scaled dot-product attention over [B, S, C] token batches, with residual
/// added by the caller.
template <typename T>
TensorT<T> attend(const TensorT<T>& tokens, const MultiHeadAttnT<T>& blk) {
  const int64_t B = tokens.shape()[0], S = tokens.shape()[1], C = tokens.shape()[2];
  const int64_t h = blk.heads, dh = C / h;

  TensorT<T> t = tokens;
  if (blk.pre_norm) t = layernorm_forward(t, *blk.pre_norm);
  if (blk.posenc) t = add(t, sinusoidal_posenc<T>(S, C));

  auto split_heads = [&](const TensorT<T>& m) {
    return permute(reshape(m, {B, S, h, dh}), {0, 2, 1, 3});  // [B,h,S,dh]
  };
  TensorT<T> qh = split_heads(linear_forward(t, blk.q));
  TensorT<T> kh = split_heads(linear_forward(t, blk.k));
  TensorT<T> vh = split_heads(linear_forward(t, blk.v));

  TensorT<T> scores = scale(matmul(qh, permute(kh, {0, 1, 3, 2})), T(1.0 / std::sqrt(double(dh))));
  TensorT<T> weights = softmax(scores, 3);  // rows sum to 1
  TensorT<T> ctx = reshape(permute(matmul(weights, vh), {0, 2, 1, 3}), {B, S, C});
  return linear_forward(ctx, blk.o);
}

}  // namespace detail

/// Temporal mode folds (N,H,W) into the batch and attends over the T frames of
/// each spatial position; spatial mode folds (N,T) and attends over the H*W
/// positions. Residual: out = x + attended(x).
template <typename T>
TensorT<T> mha_forward(const TensorT<T>& x, const MultiHeadAttnT<T>& blk) {
  if (x.rank() != 5 || x.shape()[1] != blk.dim)
    fail(ErrorKind::Shape, "attention channel mismatch: " + shape_str(x.shape()) + " vs C=" + std::to_string(blk.dim));
  const int64_t N = x.shape()[0], C = x.shape()[1], Tm = x.shape()[2], H = x.shape()[3], W = x.shape()[4];

  TensorT<T> attended;
  if (blk.axis == AttnAxis::Temporal) {
    TensorT<T> tok = reshape(permute(x, {0, 3, 4, 2, 1}), {N * H * W, Tm, C});
    TensorT<T> y = detail::attend(tok, blk);
    attended = permute(reshape(y, {N, H, W, Tm, C}), {0, 4, 3, 1, 2});
  } else {
    TensorT<T> tok = reshape(permute(x, {0, 2, 3, 4, 1}), {N * Tm, H * W, C});
    TensorT<T> y = detail::attend(tok, blk);
    attended = permute(reshape(y, {N, Tm, H, W, C}), {0, 4, 1, 2, 3});
  }
  return add(x, attended);
}

// ---- temporal convolutional block --------------------------------------------------

template <typename T>
struct TCNBlockT {
  Conv1dCausalT<T> conv;
  int64_t channels = 0;

  static TCNBlockT make(int64_t channels, const Rng& rng) {
    TCNBlockT b;
    b.channels = channels;
    b.conv = Conv1dCausalT<T>::make(channels, 3, rng);
    return b;
  }

  int64_t param_count() const { return 3 * channels * channels + channels; }
};

/// Causal residual temporal convolution: spatial positions fold into the
/// batch, then out = x + relu(causal_conv(x)).
template <typename T>
TensorT<T> tcn_forward(const TensorT<T>& x, const TCNBlockT<T>& blk) {
  if (x.rank() != 5 || x.shape()[1] != blk.channels)
    fail(ErrorKind::Shape, "TCN channel mismatch: " + shape_str(x.shape()) + " vs C=" + std::to_string(blk.channels));
  const int64_t N = x.shape()[0], C = x.shape()[1], Tm = x.shape()[2], H = x.shape()[3], W = x.shape()[4];
  TensorT<T> folded = reshape(permute(x, {0, 3, 4, 1, 2}), {N * H * W, C, Tm});
  TensorT<T> y = relu(conv1d_causal_forward(folded, blk.conv));
  TensorT<T> back = permute(reshape(y, {N, H, W, C, Tm}), {0, 3, 4, 1, 2});
  return add(x, back);
}

// ---- block dispatch ----------------------------------------------------------------

template <typename T>
using AttnBlockT = std::variant<SEBlockT<T>, MultiHeadAttnT<T>, CBAMBlockT<T>, TCNBlockT<T>>;

template <typename T>
int64_t block_param_count(const AttnBlockT<T>& blk) {
  return std::visit([](const auto& b) { return b.param_count(); }, blk);
}

template <typename T>
TensorT<T> attn_block_forward(const TensorT<T>& x, const AttnBlockT<T>& blk) {
  return std::visit(
      [&](const auto& b) -> TensorT<T> {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, SEBlockT<T>>) return se_forward(x, b);
        else if constexpr (std::is_same_v<B, MultiHeadAttnT<T>>) return mha_forward(x, b);
        else if constexpr (std::is_same_v<B, CBAMBlockT<T>>) return cbam_forward(x, b);
        else return tcn_forward(x, b);
      },
      blk);
}

}  // namespace vlab
