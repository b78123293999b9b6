#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vlab/error.hpp"
#include "vlab/rng.hpp"

namespace vlab {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

inline void check_shape(const Shape& s) {
  for (int64_t e : s)
    if (e < 1) fail(ErrorKind::Shape, "extent must be >= 1, got " + shape_str(s));
}

inline std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

template <typename T>
class TapeT;

template <typename T>
struct TensorImplT {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  int64_t node = -1;  // index of the producing node on `tape`
  TapeT<T>* tape = nullptr;
};

/// Dense row-major tensor; a cheap shared handle. Data is immutable after
/// construction apart from the grad buffer (and explicit mutation by owners
/// such as the optimizer or BatchNorm state updates).
template <typename T>
class TensorT {
 public:
  using Impl = TensorImplT<T>;

  TensorT() = default;

  explicit TensorT(Shape shape, T fill = T(0)) {
    check_shape(shape);
    impl_ = std::make_shared<Impl>();
    impl_->data = std::make_shared<std::vector<T>>(size_t(shape_numel(shape)), fill);
    impl_->shape = std::move(shape);
  }

  static TensorT from_impl(std::shared_ptr<Impl> impl) {
    TensorT t;
    t.impl_ = std::move(impl);
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t rank() const { return int64_t(impl_->shape.size()); }
  int64_t numel() const { return int64_t(impl_->data->size()); }
  int64_t extent(int64_t axis) const { return impl_->shape[size_t(axis)]; }

  T* data() { return impl_->data->data(); }
  const T* data() const { return impl_->data->data(); }
  std::vector<T>& vec() { return *impl_->data; }
  const std::vector<T>& vec() const { return *impl_->data; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::vector<T>& grad() { return impl_->grad; }
  const std::vector<T>& grad() const { return impl_->grad; }
  void ensure_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data->size(), T(0));
  }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->grad.size(), T(0));
  }

  bool requires_grad() const { return impl_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  T item() const {
    if (numel() != 1) fail(ErrorKind::Rank, "item() on tensor of shape " + shape_str(shape()));
    return (*impl_->data)[0];
  }

  T at(std::initializer_list<int64_t> idx) const {
    return (*impl_->data)[size_t(flat_index(idx))];
  }

  int64_t flat_index(std::initializer_list<int64_t> idx) const {
    if (int64_t(idx.size()) != rank()) fail(ErrorKind::Rank, "index rank mismatch");
    auto st = row_major_strides(shape());
    int64_t f = 0;
    size_t i = 0;
    for (int64_t v : idx) f += v * st[i++];
    return f;
  }

  std::shared_ptr<Impl> impl() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

/// Records the forward graph for one backward pass. Node order is creation
/// order, which is topological by construction. One tape is active per
/// training context; activation is thread-local.
template <typename T>
class TapeT {
 public:
  struct Node {
    std::vector<std::shared_ptr<TensorImplT<T>>> parents;
    std::shared_ptr<TensorImplT<T>> out;
    std::function<void(const Node&)> backward;
  };

  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;
  ~TapeT() {
    if (active_tape() == this) active_tape() = nullptr;
  }

  class Scope {
   public:
    explicit Scope(TapeT& tape) : prev_(active_tape()) { active_tape() = &tape; }
    ~Scope() { active_tape() = prev_; }
    Scope(const Scope&) = delete;

   private:
    TapeT* prev_;
  };

  static TapeT* active() { return active_tape(); }

  size_t size() const { return nodes_.size(); }

  /// True when `t` carries history on this live tape.
  bool tracks(const TensorT<T>& t) const {
    auto& im = *t.impl();
    return im.tape == this && im.node >= 0 && size_t(im.node) < nodes_.size();
  }

  void record(std::vector<std::shared_ptr<TensorImplT<T>>> parents, const TensorT<T>& out,
              std::function<void(const Node&)> backward) {
    Node n;
    n.parents = std::move(parents);
    n.out = out.impl();
    n.backward = std::move(backward);
    out.impl()->node = int64_t(nodes_.size());
    out.impl()->tape = this;
    nodes_.push_back(std::move(n));
  }

  /// Reverse pass from a scalar loss. Consumes the tape.
  void backward(const TensorT<T>& loss) {
    if (loss.numel() != 1) fail(ErrorKind::Rank, "backward needs a scalar loss, got " + shape_str(loss.shape()));
    if (!tracks(loss)) fail(ErrorKind::NoTape, "loss is not on the active tape");

    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<int64_t> stack{loss.impl()->node};
    reachable[size_t(loss.impl()->node)] = 1;
    while (!stack.empty()) {
      int64_t id = stack.back();
      stack.pop_back();
      for (auto& p : nodes_[size_t(id)].parents) {
        if (p->tape == this && p->node >= 0 && size_t(p->node) < nodes_.size() && !reachable[size_t(p->node)]) {
          reachable[size_t(p->node)] = 1;
          stack.push_back(p->node);
        }
      }
    }

    loss.impl()->grad.assign(1, T(1));
    for (int64_t id = loss.impl()->node; id >= 0; --id) {
      if (!reachable[size_t(id)]) continue;
      Node& n = nodes_[size_t(id)];
      if (n.out->grad.empty()) continue;
      n.backward(n);
    }
    clear();
  }

  void clear() { nodes_.clear(); }

 private:
  static TapeT*& active_tape() {
    thread_local TapeT* tape = nullptr;
    return tape;
  }

  std::vector<Node> nodes_;
};

template <typename T>
inline void ensure_grad_buffer(TensorImplT<T>& im) {
  if (im.grad.empty()) im.grad.assign(im.data->size(), T(0));
}

/// Whether an op consuming these inputs must be recorded.
template <typename T>
inline bool needs_tape(std::initializer_list<const TensorT<T>*> inputs) {
  TapeT<T>* tape = TapeT<T>::active();
  if (!tape) return false;
  for (const TensorT<T>* t : inputs)
    if (t->requires_grad() || tape->tracks(*t)) return true;
  return false;
}

template <typename T>
inline void backward(const TensorT<T>& loss) {
  TapeT<T>* tape = TapeT<T>::active();
  if (!tape) fail(ErrorKind::NoTape, "no active tape");
  tape->backward(loss);
}

// ---- construction -----------------------------------------------------------

template <typename T>
TensorT<T> zeros(Shape shape) {
  return TensorT<T>(std::move(shape), T(0));
}

template <typename T>
TensorT<T> ones(Shape shape) {
  return TensorT<T>(std::move(shape), T(1));
}

template <typename T>
TensorT<T> full(Shape shape, T value) {
  return TensorT<T>(std::move(shape), value);
}

template <typename T>
TensorT<T> uniform(Shape shape, const Rng& rng, T lo, T hi) {
  TensorT<T> t(std::move(shape));
  T* d = t.data();
  const int64_t n = t.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) d[i] = T(rng.uniform_at(uint64_t(i), float(lo), float(hi)));
  return t;
}

/// Kaiming-uniform: +-sqrt(6 / fan_in).
template <typename T>
TensorT<T> kaiming_uniform(Shape shape, const Rng& rng, int64_t fan_in) {
  if (fan_in < 1) fail(ErrorKind::Shape, "fan_in must be >= 1");
  T bound = T(std::sqrt(6.0 / double(fan_in)));
  return uniform<T>(std::move(shape), rng, -bound, bound);
}

template <typename T>
TensorT<T> from_values(Shape shape, std::vector<T> values) {
  check_shape(shape);
  if (int64_t(values.size()) != shape_numel(shape))
    fail(ErrorKind::Shape, "value count does not match shape " + shape_str(shape));
  TensorT<T> t(shape);
  t.vec() = std::move(values);
  return t;
}

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace vlab
