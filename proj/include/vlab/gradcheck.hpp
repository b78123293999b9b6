#pragma once

#include <cstring>
#include <functional>

#include "vlab/ops.hpp"

namespace vlab {

template <typename T>
struct GradCheckResult {
  T max_rel_err = T(0);
  int64_t worst_coord = -1;
  T worst_ad = T(0);
  T worst_fd = T(0);
  int64_t coords_checked = 0;
  int64_t coords_skipped = 0;  // kink guard only
};

/// Central differences on `target`'s entries against the autodiff gradient the
/// tape assigns to `target` after backpropagating `loss_fn()`.
///
/// `loss_fn` must read `target` (directly or through a model that owns it) and
/// be deterministic; determinism is verified by bitwise comparison of two
/// evaluations. `max_coords` limits the number of probed coordinates for large
/// tensors (evenly spaced, deterministic).
///
/// Central differences are only a valid derivative oracle where the function
/// is differentiable at the probe scale; `skip_kinks` drops coordinates whose
/// one-sided differences disagree strongly (a relu/max kink inside the probe
/// interval), which matters for 32-bit checks with their larger step.
template <typename T, typename LossFn>
GradCheckResult<T> grad_check_at(LossFn&& loss_fn, TensorT<T> target, T eps, int64_t max_coords = -1,
                                 bool skip_kinks = false) {
  const bool was_requiring = target.requires_grad();
  target.set_requires_grad(true);

  T probe1, probe2;
  {
    TensorT<T> l = loss_fn();
    if (l.numel() != 1) fail(ErrorKind::Rank, "grad_check loss must be scalar");
    probe1 = l.item();
    probe2 = loss_fn().item();
  }
  if (std::memcmp(&probe1, &probe2, sizeof(T)) != 0)
    fail(ErrorKind::Oracle, "grad_check function is not deterministic under repeat evaluation");

  std::vector<T> ad;
  {
    TapeT<T> tape;
    typename TapeT<T>::Scope scope(tape);
    target.zero_grad();
    TensorT<T> loss = loss_fn();
    backward(loss);
    target.ensure_grad();
    ad = target.grad();
    target.zero_grad();
  }

  const int64_t n = target.numel();
  int64_t probes = (max_coords > 0 && max_coords < n) ? max_coords : n;
  GradCheckResult<T> res;
  res.coords_checked = probes;
  T* data = target.data();
  for (int64_t k = 0; k < probes; ++k) {
    const int64_t i = (probes == n) ? k : (k * n) / probes;
    const T saved = data[i];
    data[i] = saved + eps;
    T fp = loss_fn().item();
    data[i] = saved - eps;
    T fm = loss_fn().item();
    data[i] = saved;
    T fd = (fp - fm) / (T(2) * eps);
    if (skip_kinks) {
      // For a kink (slope jump) inside the probe interval the central
      // difference is off by exactly half the one-sided disagreement, so any
      // visible disagreement is re-probed at eps/8: smooth curvature shrinks
      // away, while a kink that stays inside the smaller interval is skipped.
      auto disagreement = [&](T f_plus, T f_minus, T step) {
        const T dplus = (f_plus - probe1) / step;
        const T dminus = (probe1 - f_minus) / step;
        const T base = std::max({std::abs(dplus), std::abs(dminus), T(1)});
        return std::abs(dplus - dminus) / base;
      };
      const T kink_tol = T(2e-3);
      if (disagreement(fp, fm, eps) > kink_tol) {
        const T eps2 = eps / T(8);
        data[i] = saved + eps2;
        T fp2 = loss_fn().item();
        data[i] = saved - eps2;
        T fm2 = loss_fn().item();
        data[i] = saved;
        if (disagreement(fp2, fm2, eps2) > kink_tol) {
          ++res.coords_skipped;
          continue;
        }
        fd = (fp2 - fm2) / (T(2) * eps2);
      }
    }
    const T a = ad[size_t(i)];
    const T denom = std::max({std::abs(a), std::abs(fd), T(1)});
    const T err = std::abs(a - fd) / denom;
    if (err > res.max_rel_err) {
      res.max_rel_err = err;
      res.worst_coord = i;
      res.worst_ad = a;
      res.worst_fd = fd;
    }
  }
  target.set_requires_grad(was_requiring);
  return res;
}

/// Common entry point: perturb the function input itself.
template <typename T, typename F>
GradCheckResult<T> grad_check(F&& f, TensorT<T> x, T eps, int64_t max_coords = -1,
                              bool skip_kinks = false) {
  return grad_check_at([&]() { return f(x); }, x, eps, max_coords, skip_kinks);
}

}  // namespace vlab
