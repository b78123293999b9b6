#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vlab/tensor.hpp"

namespace vlab {

// ---- broadcasting -----------------------------------------------------------

struct BcPlan {
  Shape out_shape;
  std::vector<int64_t> stride_a, stride_b;  // per output axis; 0 where broadcast
  int64_t numel = 0;
};

inline BcPlan make_bc_plan(const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.size(), b.size());
  BcPlan plan;
  plan.out_shape.resize(rank);
  std::vector<int64_t> ea(rank, 1), eb(rank, 1);  // right-aligned extents
  for (size_t i = 0; i < a.size(); ++i) ea[rank - a.size() + i] = a[i];
  for (size_t i = 0; i < b.size(); ++i) eb[rank - b.size() + i] = b[i];
  for (size_t i = 0; i < rank; ++i) {
    if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1)
      fail(ErrorKind::Broadcast, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    plan.out_shape[i] = std::max(ea[i], eb[i]);
  }
  auto sa = row_major_strides(ea), sb = row_major_strides(eb);
  plan.stride_a.resize(rank);
  plan.stride_b.resize(rank);
  for (size_t i = 0; i < rank; ++i) {
    plan.stride_a[i] = (ea[i] == 1 && plan.out_shape[i] != 1) ? 0 : sa[i];
    plan.stride_b[i] = (eb[i] == 1 && plan.out_shape[i] != 1) ? 0 : sb[i];
  }
  plan.numel = shape_numel(plan.out_shape);
  return plan;
}

/// Odometer walk over the broadcast output; fn(ia, ib, io).
template <typename Fn>
inline void for_each_bc(const BcPlan& plan, Fn&& fn) {
  const size_t rank = plan.out_shape.size();
  if (rank == 0) {
    fn(int64_t(0), int64_t(0), int64_t(0));
    return;
  }
  std::vector<int64_t> idx(rank, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t io = 0; io < plan.numel; ++io) {
    fn(ia, ib, io);
    for (size_t ax = rank; ax-- > 0;) {
      idx[ax]++;
      ia += plan.stride_a[ax];
      ib += plan.stride_b[ax];
      if (idx[ax] < plan.out_shape[ax]) break;
      ia -= plan.stride_a[ax] * idx[ax];
      ib -= plan.stride_b[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

// ---- elementwise binary -----------------------------------------------------

enum class BinKind { Add, Sub, Mul };

template <typename T>
TensorT<T> binary_ewise(BinKind kind, const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> out;
  const bool same = a.shape() == b.shape();
  BcPlan plan;
  if (same) {
    plan.out_shape = a.shape();
    plan.numel = a.numel();
  } else {
    plan = make_bc_plan(a.shape(), b.shape());
  }
  out = TensorT<T>(plan.out_shape);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  if (same) {
    const int64_t n = plan.numel;
    switch (kind) {
      case BinKind::Add:
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
      case BinKind::Sub:
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
      case BinKind::Mul:
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    }
  } else {
    switch (kind) {
      case BinKind::Add:
        for_each_bc(plan, [&](int64_t ia, int64_t ib, int64_t io) { po[io] = pa[ia] + pb[ib]; });
        break;
      case BinKind::Sub:
        for_each_bc(plan, [&](int64_t ia, int64_t ib, int64_t io) { po[io] = pa[ia] - pb[ib]; });
        break;
      case BinKind::Mul:
        for_each_bc(plan, [&](int64_t ia, int64_t ib, int64_t io) { po[io] = pa[ia] * pb[ib]; });
        break;
    }
  }

  if (needs_tape<T>({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    TapeT<T>::active()->record(
        {ai, bi}, out, [kind, ai, bi, plan, same](const typename TapeT<T>::Node& n) {
          ensure_grad_buffer(*ai);
          ensure_grad_buffer(*bi);
          const std::vector<T>& go = n.out->grad;
          T* ga = ai->grad.data();
          T* gb = bi->grad.data();
          const T* va = ai->data->data();
          const T* vb = bi->data->data();
          if (same) {
            const int64_t cnt = int64_t(go.size());
            switch (kind) {
              case BinKind::Add:
                for (int64_t i = 0; i < cnt; ++i) {
                  ga[i] += go[size_t(i)];
                  gb[i] += go[size_t(i)];
                }
                break;
              case BinKind::Sub:
                for (int64_t i = 0; i < cnt; ++i) {
                  ga[i] += go[size_t(i)];
                  gb[i] -= go[size_t(i)];
                }
                break;
              case BinKind::Mul:
                for (int64_t i = 0; i < cnt; ++i) {
                  ga[i] += go[size_t(i)] * vb[i];
                  gb[i] += go[size_t(i)] * va[i];
                }
                break;
            }
          } else {
            switch (kind) {
              case BinKind::Add:
                for_each_bc(plan, [&](int64_t ia2, int64_t ib2, int64_t io) {
                  ga[ia2] += go[size_t(io)];
                  gb[ib2] += go[size_t(io)];
                });
                break;
              case BinKind::Sub:
                for_each_bc(plan, [&](int64_t ia2, int64_t ib2, int64_t io) {
                  ga[ia2] += go[size_t(io)];
                  gb[ib2] -= go[size_t(io)];
                });
                break;
              case BinKind::Mul:
                for_each_bc(plan, [&](int64_t ia2, int64_t ib2, int64_t io) {
                  ga[ia2] += go[size_t(io)] * vb[ib2];
                  gb[ib2] += go[size_t(io)] * va[ia2];
                });
                break;
            }
          }
        });
  }
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return binary_ewise(BinKind::Add, a, b);
}
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return binary_ewise(BinKind::Sub, a, b);
}
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return binary_ewise(BinKind::Mul, a, b);
}

// ---- elementwise unary ------------------------------------------------------

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    TapeT<T>::active()->record({xi}, out, [xi](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const T* vx = xi->data->data();
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      for (size_t i = 0; i < go.size(); ++i)
        if (vx[i] > T(0)) gx[i] += go[i];
    });
  }
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    T v = px[i];
    if (v >= T(0)) {
      po[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      T e = std::exp(v);
      po[i] = e / (T(1) + e);
    }
  }
  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    auto oi = out.impl();
    TapeT<T>::active()->record({xi}, out, [xi, oi](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const T* y = oi->data->data();
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * y[i] * (T(1) - y[i]);
    });
  }
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& x, T c) {
  TensorT<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] * c;
  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    TapeT<T>::active()->record({xi}, out, [xi, c](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * c;
    });
  }
  return out;
}

// ---- matmul -----------------------------------------------------------------

namespace detail {

// C[m,n] += sum_k A[m,k] * B[k,n]
template <typename T>
inline void gemm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      T* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += sum_k A[m,k] * B[n,k]
template <typename T>
inline void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      const T* arow = a + i * k;
      const T* brow = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[k,n] += sum_m A[m,k] * B[m,n]
template <typename T>
inline void gemm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) fail(ErrorKind::Rank, "matmul needs rank >= 2 operands");
  if (a.rank() != b.rank())
    fail(ErrorKind::Shape, "matmul rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const size_t r = size_t(a.rank());
  for (size_t i = 0; i + 2 < r; ++i)
    if (a.shape()[i] != b.shape()[i])
      fail(ErrorKind::Shape, "matmul batch axes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t m = a.shape()[r - 2], k = a.shape()[r - 1];
  const int64_t k2 = b.shape()[r - 2], n = b.shape()[r - 1];
  if (k != k2)
    fail(ErrorKind::Shape, "matmul inner extents differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape os(a.shape());
  os[r - 2] = m;
  os[r - 1] = n;
  int64_t batch = 1;
  for (size_t i = 0; i + 2 < r; ++i) batch *= a.shape()[i];

  TensorT<T> out(os);
  {
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t bi = 0; bi < batch; ++bi)
      detail::gemm_nn(pa + bi * m * k, pb + bi * k * n, po + bi * m * n, m, k, n);
  }

  if (needs_tape<T>({&a, &b})) {
    auto ai = a.impl(), bi_ = b.impl();
    TapeT<T>::active()->record({ai, bi_}, out, [ai, bi_, batch, m, k, n](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*ai);
      ensure_grad_buffer(*bi_);
      const std::vector<T>& go = nd.out->grad;
      const T* pa = ai->data->data();
      const T* pb = bi_->data->data();
      T* ga = ai->grad.data();
      T* gb = bi_->grad.data();
#pragma omp parallel for schedule(static)
      for (int64_t bt = 0; bt < batch; ++bt) {
        // dA = dY * B^T ; dB = A^T * dY
        detail::gemm_nt(go.data() + bt * m * n, pb + bt * k * n, ga + bt * m * k, m, n, k);
        detail::gemm_tn(pa + bt * m * k, go.data() + bt * m * n, gb + bt * k * n, m, k, n);
      }
    });
  }
  return out;
}

// ---- reductions -------------------------------------------------------------

enum class ReduceKind { Sum, Mean, Max };

namespace detail {

inline void check_axes(const Shape& shape, const std::vector<int64_t>& axes) {
  std::vector<char> seen(shape.size(), 0);
  for (int64_t ax : axes) {
    if (ax < 0 || size_t(ax) >= shape.size()) fail(ErrorKind::Axis, "axis " + std::to_string(ax) + " out of range for " + shape_str(shape));
    if (seen[size_t(ax)]) fail(ErrorKind::Axis, "duplicate axis " + std::to_string(ax));
    seen[size_t(ax)] = 1;
  }
  if (axes.empty()) fail(ErrorKind::Axis, "reduce needs at least one axis");
}

/// Per input axis, the stride of its index in the reduced output (0 on reduced axes).
inline std::vector<int64_t> reduce_out_strides(const Shape& in, const std::vector<int64_t>& axes,
                                               Shape& kept_shape) {
  std::vector<char> reduced(in.size(), 0);
  for (int64_t ax : axes) reduced[size_t(ax)] = 1;
  kept_shape = in;
  for (size_t i = 0; i < in.size(); ++i)
    if (reduced[i]) kept_shape[i] = 1;
  auto ks = row_major_strides(kept_shape);
  std::vector<int64_t> os(in.size());
  for (size_t i = 0; i < in.size(); ++i) os[i] = reduced[i] ? 0 : ks[i];
  return os;
}

/// fn(in_flat, out_flat) over every input element, ascending in_flat.
template <typename Fn>
inline void for_each_reduce(const Shape& in, const std::vector<int64_t>& ostrides, Fn&& fn) {
  const size_t rank = in.size();
  const int64_t n = shape_numel(in);
  if (rank == 0) {
    fn(int64_t(0), int64_t(0));
    return;
  }
  std::vector<int64_t> idx(rank, 0);
  int64_t of = 0;
  for (int64_t i = 0; i < n; ++i) {
    fn(i, of);
    for (size_t ax = rank; ax-- > 0;) {
      idx[ax]++;
      of += ostrides[ax];
      if (idx[ax] < in[ax]) break;
      of -= ostrides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace detail

template <typename T>
TensorT<T> reduce(const TensorT<T>& x, const std::vector<int64_t>& axes, ReduceKind kind,
                  bool keepdims = false) {
  detail::check_axes(x.shape(), axes);
  Shape kept;
  auto ostrides = detail::reduce_out_strides(x.shape(), axes, kept);
  int64_t count = 1;
  for (int64_t ax : axes) count *= x.shape()[size_t(ax)];

  Shape out_shape;
  if (keepdims) {
    out_shape = kept;
  } else {
    std::vector<char> reduced(x.shape().size(), 0);
    for (int64_t ax : axes) reduced[size_t(ax)] = 1;
    for (size_t i = 0; i < x.shape().size(); ++i)
      if (!reduced[i]) out_shape.push_back(x.shape()[i]);
  }

  const int64_t out_n = shape_numel(kept);
  TensorT<T> out(out_shape.empty() ? Shape{} : out_shape);
  const T* px = x.data();
  T* po = out.data();
  std::shared_ptr<std::vector<int64_t>> argmax;

  switch (kind) {
    case ReduceKind::Sum:
    case ReduceKind::Mean: {
      std::fill(po, po + out_n, T(0));
      detail::for_each_reduce(x.shape(), ostrides, [&](int64_t i, int64_t o) { po[o] += px[i]; });
      if (kind == ReduceKind::Mean)
        for (int64_t o = 0; o < out_n; ++o) po[o] = po[o] / T(count);
      break;
    }
    case ReduceKind::Max: {
      argmax = std::make_shared<std::vector<int64_t>>(size_t(out_n), int64_t(-1));
      detail::for_each_reduce(x.shape(), ostrides, [&](int64_t i, int64_t o) {
        // first maximal element wins: strict comparison, ascending flat order
        if ((*argmax)[size_t(o)] < 0 || px[i] > po[o]) {
          po[o] = px[i];
          (*argmax)[size_t(o)] = i;
        }
      });
      break;
    }
  }

  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    Shape in_shape = x.shape();
    TapeT<T>::active()->record(
        {xi}, out, [xi, kind, count, in_shape, ostrides, argmax](const typename TapeT<T>::Node& nd) {
          ensure_grad_buffer(*xi);
          const std::vector<T>& go = nd.out->grad;
          T* gx = xi->grad.data();
          switch (kind) {
            case ReduceKind::Sum:
              detail::for_each_reduce(in_shape, ostrides, [&](int64_t i, int64_t o) { gx[i] += go[size_t(o)]; });
              break;
            case ReduceKind::Mean:
              detail::for_each_reduce(in_shape, ostrides,
                                      [&](int64_t i, int64_t o) { gx[i] += go[size_t(o)] / T(count); });
              break;
            case ReduceKind::Max:
              for (size_t o = 0; o < argmax->size(); ++o) gx[(*argmax)[o]] += go[o];
              break;
          }
        });
  }
  return out;
}

template <typename T>
TensorT<T> reduce_sum(const TensorT<T>& x, const std::vector<int64_t>& axes, bool keepdims = false) {
  return reduce(x, axes, ReduceKind::Sum, keepdims);
}
template <typename T>
TensorT<T> reduce_mean(const TensorT<T>& x, const std::vector<int64_t>& axes, bool keepdims = false) {
  return reduce(x, axes, ReduceKind::Mean, keepdims);
}
template <typename T>
TensorT<T> reduce_max(const TensorT<T>& x, const std::vector<int64_t>& axes, bool keepdims = false) {
  return reduce(x, axes, ReduceKind::Max, keepdims);
}

// ---- softmax ----------------------------------------------------------------

template <typename T>
TensorT<T> softmax(const TensorT<T>& x, int64_t axis) {
  if (axis < 0 || axis >= x.rank()) fail(ErrorKind::Axis, "softmax axis out of range");
  const int64_t K = x.shape()[size_t(axis)];
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= x.shape()[size_t(i)];
  for (int64_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[size_t(i)];

  TensorT<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
#pragma omp parallel for schedule(static) collapse(2)
  for (int64_t ou = 0; ou < outer; ++ou) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = ou * K * inner + in;
      T mx = px[base];
      for (int64_t j = 1; j < K; ++j) mx = std::max(mx, px[base + j * inner]);
      T sum = T(0);
      for (int64_t j = 0; j < K; ++j) {
        T e = std::exp(px[base + j * inner] - mx);
        po[base + j * inner] = e;
        sum += e;
      }
      for (int64_t j = 0; j < K; ++j) po[base + j * inner] /= sum;
    }
  }

  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    auto oi = out.impl();
    TapeT<T>::active()->record({xi}, out, [xi, oi, outer, inner, K](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const T* y = oi->data->data();
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      for (int64_t ou = 0; ou < outer; ++ou) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = ou * K * inner + in;
          T dot = T(0);
          for (int64_t j = 0; j < K; ++j) dot += go[size_t(base + j * inner)] * y[base + j * inner];
          for (int64_t j = 0; j < K; ++j) {
            const int64_t f = base + j * inner;
            gx[f] += y[f] * (go[size_t(f)] - dot);
          }
        }
      }
    });
  }
  return out;
}

// ---- layout ops -------------------------------------------------------------

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape new_shape) {
  check_shape(new_shape);
  if (shape_numel(new_shape) != x.numel())
    fail(ErrorKind::Shape, "reshape " + shape_str(x.shape()) + " -> " + shape_str(new_shape) + " changes element count");
  auto impl = std::make_shared<TensorImplT<T>>();
  impl->data = x.impl()->data;  // shared buffer, new shape
  impl->shape = std::move(new_shape);
  TensorT<T> out = TensorT<T>::from_impl(impl);
  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    TapeT<T>::active()->record({xi}, out, [xi](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

namespace detail {

/// fn(in_flat, out_flat) where out index is the input multi-index pushed
/// through per-input-axis output strides.
template <typename Fn>
inline void for_each_strided(const Shape& in, const std::vector<int64_t>& contrib, Fn&& fn) {
  const size_t rank = in.size();
  const int64_t n = shape_numel(in);
  if (rank == 0) {
    fn(int64_t(0), int64_t(0));
    return;
  }
  std::vector<int64_t> idx(rank, 0);
  int64_t of = 0;
  for (int64_t i = 0; i < n; ++i) {
    fn(i, of);
    for (size_t ax = rank; ax-- > 0;) {
      idx[ax]++;
      of += contrib[ax];
      if (idx[ax] < in[ax]) break;
      of -= contrib[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace detail

template <typename T>
TensorT<T> permute(const TensorT<T>& x, const std::vector<int64_t>& perm) {
  const size_t rank = size_t(x.rank());
  if (perm.size() != rank) fail(ErrorKind::Axis, "permute axis list has wrong length");
  std::vector<char> seen(rank, 0);
  for (int64_t p : perm) {
    if (p < 0 || size_t(p) >= rank || seen[size_t(p)]) fail(ErrorKind::Axis, "permute axes must be a permutation");
    seen[size_t(p)] = 1;
  }
  Shape os(rank);
  for (size_t d = 0; d < rank; ++d) os[d] = x.shape()[size_t(perm[d])];
  auto ostr = row_major_strides(os);
  // contribution of input axis a = output stride of the axis it lands on
  std::vector<int64_t> contrib(rank);
  for (size_t d = 0; d < rank; ++d) contrib[size_t(perm[d])] = ostr[d];

  TensorT<T> out(os);
  const T* px = x.data();
  T* po = out.data();
  detail::for_each_strided(x.shape(), contrib, [&](int64_t i, int64_t o) { po[o] = px[i]; });

  if (needs_tape<T>({&x})) {
    auto xi = x.impl();
    Shape in_shape = x.shape();
    TapeT<T>::active()->record({xi}, out, [xi, in_shape, contrib](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*xi);
      const std::vector<T>& go = nd.out->grad;
      T* gx = xi->grad.data();
      detail::for_each_strided(in_shape, contrib, [&](int64_t i, int64_t o) { gx[i] += go[size_t(o)]; });
    });
  }
  return out;
}

template <typename T>
TensorT<T> concat(const TensorT<T>& a, const TensorT<T>& b, int64_t axis) {
  if (a.rank() != b.rank()) fail(ErrorKind::Shape, "concat rank mismatch");
  if (axis < 0 || axis >= a.rank()) fail(ErrorKind::Axis, "concat axis out of range");
  for (int64_t i = 0; i < a.rank(); ++i)
    if (i != axis && a.shape()[size_t(i)] != b.shape()[size_t(i)])
      fail(ErrorKind::Shape, "concat shapes differ off-axis: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));

  Shape os = a.shape();
  os[size_t(axis)] += b.shape()[size_t(axis)];
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= a.shape()[size_t(i)];
  for (int64_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[size_t(i)];
  const int64_t ea = a.shape()[size_t(axis)], eb = b.shape()[size_t(axis)];

  TensorT<T> out(os);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t ou = 0; ou < outer; ++ou) {
    std::memcpy(po + ou * (ea + eb) * inner, pa + ou * ea * inner, size_t(ea * inner) * sizeof(T));
    std::memcpy(po + (ou * (ea + eb) + ea) * inner, pb + ou * eb * inner, size_t(eb * inner) * sizeof(T));
  }

  if (needs_tape<T>({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    TapeT<T>::active()->record({ai, bi}, out, [ai, bi, outer, inner, ea, eb](const typename TapeT<T>::Node& nd) {
      ensure_grad_buffer(*ai);
      ensure_grad_buffer(*bi);
      const std::vector<T>& go = nd.out->grad;
      T* ga = ai->grad.data();
      T* gb = bi->grad.data();
      for (int64_t ou = 0; ou < outer; ++ou) {
        const T* src = go.data() + ou * (ea + eb) * inner;
        for (int64_t j = 0; j < ea * inner; ++j) ga[ou * ea * inner + j] += src[j];
        for (int64_t j = 0; j < eb * inner; ++j) gb[ou * eb * inner + j] += src[ea * inner + j];
      }
    });
  }
  return out;
}

}  // namespace vlab
