#pragma once

#include "vlab/layers.hpp"

namespace vlab {

/// Reference 3D cross-correlation: seven plain nested loops, 64-bit
/// accumulation, no blocking. This is the authority the fast path is tested
/// against; it deliberately shares no loop machinery with conv3d_forward.
template <typename T>
TensorT<T> conv3d_naive_oracle(const TensorT<T>& x, const Conv3dT<T>& layer) {
  if (x.rank() != 5) fail(ErrorKind::Rank, "conv3d input must be rank 5");
  if (x.shape()[1] != layer.weight.shape()[1]) fail(ErrorKind::Shape, "conv3d channel mismatch");

  const int64_t N = x.shape()[0], C = x.shape()[1];
  const int64_t iT = x.shape()[2], iH = x.shape()[3], iW = x.shape()[4];
  const int64_t OC = layer.weight.shape()[0];
  const int64_t kt = layer.weight.shape()[2], kh = layer.weight.shape()[3], kw = layer.weight.shape()[4];
  const int64_t st = layer.stride[0], sh = layer.stride[1], sw = layer.stride[2];
  const int64_t pt = layer.padding[0], ph = layer.padding[1], pw = layer.padding[2];

  const int64_t oT = (iT + 2 * pt - kt) / st + 1;
  const int64_t oH = (iH + 2 * ph - kh) / sh + 1;
  const int64_t oW = (iW + 2 * pw - kw) / sw + 1;
  if (oT < 1 || oH < 1 || oW < 1) fail(ErrorKind::Geometry, "conv3d output extent < 1");

  TensorT<T> out({N, OC, oT, oH, oW});
  const T* px = x.data();
  const T* pwgt = layer.weight.data();
  const T* pb = layer.bias.defined() ? layer.bias.data() : nullptr;
  T* po = out.data();

  for (int64_t n = 0; n < N; ++n)
    for (int64_t oc = 0; oc < OC; ++oc)
      for (int64_t ot = 0; ot < oT; ++ot)
        for (int64_t oh = 0; oh < oH; ++oh)
          for (int64_t ow = 0; ow < oW; ++ow) {
            double acc = pb ? double(pb[oc]) : 0.0;
            for (int64_t ic = 0; ic < C; ++ic)
              for (int64_t a = 0; a < kt; ++a)
                for (int64_t b = 0; b < kh; ++b)
                  for (int64_t c = 0; c < kw; ++c) {
                    const int64_t it = ot * st - pt + a;
                    const int64_t ih = oh * sh - ph + b;
                    const int64_t iw = ow * sw - pw + c;
                    if (it < 0 || it >= iT || ih < 0 || ih >= iH || iw < 0 || iw >= iW) continue;
                    acc += double(pwgt[(((oc * C + ic) * kt + a) * kh + b) * kw + c]) *
                           double(px[(((n * C + ic) * iT + it) * iH + ih) * iW + iw]);
                  }
            po[(((n * OC + oc) * oT + ot) * oH + oh) * oW + ow] = T(acc);
          }
  return out;
}

}  // namespace vlab
