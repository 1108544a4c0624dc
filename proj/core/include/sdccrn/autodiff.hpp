#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "sdccrn/array.hpp"

namespace sdccrn {

// Reverse-mode tape. Ops are whole-tensor (conv, lstm, norms, elementwise),
// so the graph stays small (hundreds of nodes) and closure overhead is noise
// next to the GEMMs. Nodes hold shared_ptr parents only (children -> parents,
// no cycles); the backward closure receives the node itself by reference.
template <typename T>
struct VarNode {
  NdArray<T> value;
  NdArray<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<VarNode<T>>> parents;
  std::function<void(VarNode<T>&)> backward;

  NdArray<T>& ensure_grad() {
    if (!has_grad) {
      grad = NdArray<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
  void zero_grad() {
    if (has_grad) grad.fill(T(0));
  }
};

// Global (per-thread) switch: when grads are disabled, ops produce leaf values
// and skip parents/closures/caches. Used by inference paths.
inline bool& grad_mode_flag() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev; }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<VarNode<T>> n) : node_(std::move(n)) {}

  static Var constant(NdArray<T> v) {
    auto n = std::make_shared<VarNode<T>>();
    n->value = std::move(v);
    return Var(std::move(n));
  }
  static Var param(NdArray<T> v) {
    auto n = std::make_shared<VarNode<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const NdArray<T>& val() const { return node_->value; }
  NdArray<T>& val() { return node_->value; }
  const NdArray<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->has_grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }

  std::shared_ptr<VarNode<T>> node() const { return node_; }
  VarNode<T>& n() const { return *node_; }

 private:
  std::shared_ptr<VarNode<T>> node_;
};

namespace detail {

template <typename T>
Var<T> make_op(NdArray<T> value, std::vector<Var<T>> parents,
               std::function<void(VarNode<T>&)> backward) {
  auto n = std::make_shared<VarNode<T>>();
  n->value = std::move(value);
  if (grad_mode_flag()) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    if (rg) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node());
      n->backward = std::move(backward);
    }
  }
  return Var<T>(std::move(n));
}

}  // namespace detail

// Runs reverse accumulation from a scalar root.
template <typename T>
void backward(const Var<T>& root) {
  if (root.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!root.requires_grad()) throw std::invalid_argument("backward: root does not require grad");

  std::vector<VarNode<T>*> order;
  std::unordered_set<VarNode<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<VarNode<T>*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      VarNode<T>* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    VarNode<T>* n = *it;
    if (n->backward && n->has_grad) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise / scalar ops
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* who) {
  if (!(a.shape() == b.shape()))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}
template <typename T>
void acc(VarNode<T>& dst, const NdArray<T>& g) {
  auto& d = dst.ensure_grad();
  for (int64_t i = 0; i < g.numel(); ++i) d[i] += g[i];
}
}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "add");
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] + b.val()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [an = a.node(), bn = b.node()](VarNode<T>& n) {
    if (an->requires_grad) detail::acc(*an, n.grad);
    if (bn->requires_grad) detail::acc(*bn, n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "sub");
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] - b.val()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [an = a.node(), bn = b.node()](VarNode<T>& n) {
    if (an->requires_grad) detail::acc(*an, n.grad);
    if (bn->requires_grad) {
      auto& d = bn->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "mul");
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] * b.val()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [an = a.node(), bn = b.node()](VarNode<T>& n) {
    if (an->requires_grad) {
      auto& d = an->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& d = bn->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * an->value[i];
    }
  });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "div");
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] / b.val()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [an = a.node(), bn = b.node()](VarNode<T>& n) {
    if (an->requires_grad) {
      auto& d = an->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] / bn->value[i];
    }
    if (bn->requires_grad) {
      auto& d = bn->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) {
        T bv = bn->value[i];
        d[i] -= n.grad[i] * an->value[i] / (bv * bv);
      }
    }
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] + s;
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    detail::acc(*an, n.grad);
  });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] * s;
  return detail::make_op<T>(std::move(out), {a}, [an = a.node(), s](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * s;
  });
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return mul_scalar(a, T(-1));
}

template <typename T>
Var<T> exp_v(const Var<T>& a) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(a.val()[i]);
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * n.value[i];
  });
}

// Caller guarantees positivity (inputs are eps-floored upstream).
template <typename T>
Var<T> log_v(const Var<T>& a) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(a.val()[i]);
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] / an->value[i];
  });
}

template <typename T>
Var<T> sqrt_v(const Var<T>& a) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(a.val()[i]);
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      T y = n.value[i];
      d[i] += n.grad[i] / (T(2) * (y > T(0) ? y : T(1e-20)));
    }
  });
}

template <typename T>
Var<T> tanh_v(const Var<T>& a) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a.val()[i]);
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      T y = n.value[i];
      d[i] += n.grad[i] * (T(1) - y * y);
    }
  });
}

template <typename T>
Var<T> sigmoid_v(const Var<T>& a) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-a.val()[i]));
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      T y = n.value[i];
      d[i] += n.grad[i] * y * (T(1) - y);
    }
  });
}

// max(a, lo). Gradient passes where a > lo (floored positions are saturations).
template <typename T>
Var<T> clamp_min(const Var<T>& a, T lo) {
  NdArray<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.val()[i] > lo ? a.val()[i] : lo;
  return detail::make_op<T>(std::move(out), {a}, [an = a.node(), lo](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i)
      if (an->value[i] > lo) d[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  NdArray<T> out(Shape{1});
  T s = T(0);
  for (int64_t i = 0; i < a.numel(); ++i) s += a.val()[i];
  out[0] = s;
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    T g = n.grad[0];
    for (int64_t i = 0; i < d.numel(); ++i) d[i] += g;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  return mul_scalar(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

// [rows..., L] -> [rows...]; rank drops by one (result of rank>=1).
template <typename T>
Var<T> sum_last(const Var<T>& a) {
  if (a.shape().size() < 2) throw std::invalid_argument("sum_last: rank must be >= 2");
  Shape os(a.shape().begin(), a.shape().end() - 1);
  int64_t L = a.shape().back();
  int64_t R = shape_numel(os);
  NdArray<T> out(os);
  for (int64_t r = 0; r < R; ++r) {
    T s = T(0);
    const T* p = a.val().data() + r * L;
    for (int64_t i = 0; i < L; ++i) s += p[i];
    out[r] = s;
  }
  return detail::make_op<T>(std::move(out), {a}, [an = a.node(), L, R](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t r = 0; r < R; ++r) {
      T g = n.grad[r];
      T* p = d.data() + r * L;
      for (int64_t i = 0; i < L; ++i) p[i] += g;
    }
  });
}

namespace detail {
template <typename T>
void check_bcast_last(const Var<T>& a, const Var<T>& v, const char* who) {
  Shape expect(a.shape().begin(), a.shape().end() - 1);
  if (!(v.shape() == expect))
    throw std::invalid_argument(std::string(who) + ": broadcast shape mismatch");
}
}  // namespace detail

// a[rows..., L] - v[rows...] broadcast over the last axis.
template <typename T>
Var<T> sub_bcast_last(const Var<T>& a, const Var<T>& v) {
  detail::check_bcast_last(a, v, "sub_bcast_last");
  int64_t L = a.shape().back();
  int64_t R = v.numel();
  NdArray<T> out(a.shape());
  for (int64_t r = 0; r < R; ++r)
    for (int64_t i = 0; i < L; ++i) out[r * L + i] = a.val()[r * L + i] - v.val()[r];
  return detail::make_op<T>(std::move(out), {a, v}, [an = a.node(), vn = v.node(), L, R](VarNode<T>& n) {
    if (an->requires_grad) detail::acc(*an, n.grad);
    if (vn->requires_grad) {
      auto& d = vn->ensure_grad();
      for (int64_t r = 0; r < R; ++r) {
        T s = T(0);
        for (int64_t i = 0; i < L; ++i) s += n.grad[r * L + i];
        d[r] -= s;
      }
    }
  });
}

template <typename T>
Var<T> mul_bcast_last(const Var<T>& a, const Var<T>& v) {
  detail::check_bcast_last(a, v, "mul_bcast_last");
  int64_t L = a.shape().back();
  int64_t R = v.numel();
  NdArray<T> out(a.shape());
  for (int64_t r = 0; r < R; ++r)
    for (int64_t i = 0; i < L; ++i) out[r * L + i] = a.val()[r * L + i] * v.val()[r];
  return detail::make_op<T>(std::move(out), {a, v}, [an = a.node(), vn = v.node(), L, R](VarNode<T>& n) {
    if (an->requires_grad) {
      auto& d = an->ensure_grad();
      for (int64_t r = 0; r < R; ++r)
        for (int64_t i = 0; i < L; ++i) d[r * L + i] += n.grad[r * L + i] * vn->value[r];
    }
    if (vn->requires_grad) {
      auto& d = vn->ensure_grad();
      for (int64_t r = 0; r < R; ++r) {
        T s = T(0);
        for (int64_t i = 0; i < L; ++i) s += n.grad[r * L + i] * an->value[r * L + i];
        d[r] += s;
      }
    }
  });
}

// x[..., F] * v[F]: per-frequency scaling (spectrum compression exponents).
template <typename T>
Var<T> mul_bcast_freq(const Var<T>& x, const Var<T>& v) {
  if (v.shape().size() != 1 || v.shape()[0] != x.shape().back())
    throw std::invalid_argument("mul_bcast_freq: v must be [F] matching last axis");
  int64_t F = v.numel();
  int64_t R = x.numel() / F;
  NdArray<T> out(x.shape());
  for (int64_t r = 0; r < R; ++r)
    for (int64_t f = 0; f < F; ++f) out[r * F + f] = x.val()[r * F + f] * v.val()[f];
  return detail::make_op<T>(std::move(out), {x, v}, [xn = x.node(), vn = v.node(), F, R](VarNode<T>& n) {
    if (xn->requires_grad) {
      auto& d = xn->ensure_grad();
      for (int64_t r = 0; r < R; ++r)
        for (int64_t f = 0; f < F; ++f) d[r * F + f] += n.grad[r * F + f] * vn->value[f];
    }
    if (vn->requires_grad) {
      auto& d = vn->ensure_grad();
      for (int64_t r = 0; r < R; ++r)
        for (int64_t f = 0; f < F; ++f) d[f] += n.grad[r * F + f] * xn->value[r * F + f];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
  NdArray<T> out = a.val().reshaped(std::move(s));
  return detail::make_op<T>(std::move(out), {a}, [an = a.node()](VarNode<T>& n) {
    auto& d = an->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i];
  });
}

// [A,B,C,D] -> [A,C,B,D] (its own inverse).
template <typename T>
Var<T> permute0213(const Var<T>& x) {
  if (x.shape().size() != 4) throw std::invalid_argument("permute0213: rank-4 required");
  int64_t A = x.shape()[0], B = x.shape()[1], C = x.shape()[2], D = x.shape()[3];
  NdArray<T> out(Shape{A, C, B, D});
  const T* src = x.val().data();
  T* dst = out.data();
  for (int64_t a = 0; a < A; ++a)
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c) {
        const T* s = src + ((a * B + b) * C + c) * D;
        T* t = dst + ((a * C + c) * B + b) * D;
        for (int64_t d0 = 0; d0 < D; ++d0) t[d0] = s[d0];
      }
  return detail::make_op<T>(std::move(out), {x}, [xn = x.node(), A, B, C, D](VarNode<T>& n) {
    auto& d = xn->ensure_grad();
    const T* g = n.grad.data();
    for (int64_t a = 0; a < A; ++a)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t b = 0; b < B; ++b) {
          const T* s = g + ((a * C + c) * B + b) * D;
          T* t = d.data() + ((a * B + b) * C + c) * D;
          for (int64_t d0 = 0; d0 < D; ++d0) t[d0] += s[d0];
        }
  });
}

namespace detail {
struct AxisSplit {
  int64_t outer, axis, inner;
};
inline AxisSplit axis_split(const Shape& s, size_t axis) {
  AxisSplit r{1, s[axis], 1};
  for (size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}
}  // namespace detail

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, size_t axis) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input list");
  Shape os = xs[0].shape();
  if (axis >= os.size()) throw std::invalid_argument("concat: bad axis");
  int64_t total = 0;
  for (const auto& x : xs) {
    if (x.shape().size() != os.size()) throw std::invalid_argument("concat: rank mismatch");
    for (size_t i = 0; i < os.size(); ++i)
      if (i != axis && x.shape()[i] != os[i]) throw std::invalid_argument("concat: shape mismatch");
    total += x.shape()[axis];
  }
  os[axis] = total;
  auto sp = detail::axis_split(os, axis);
  NdArray<T> out(os);
  int64_t off = 0;
  for (const auto& x : xs) {
    int64_t ax = x.shape()[axis];
    for (int64_t o = 0; o < sp.outer; ++o) {
      const T* src = x.val().data() + o * ax * sp.inner;
      T* dst = out.data() + (o * sp.axis + off) * sp.inner;
      std::copy(src, src + ax * sp.inner, dst);
    }
    off += ax;
  }
  std::vector<int64_t> sizes;
  for (const auto& x : xs) sizes.push_back(x.shape()[axis]);
  std::vector<std::shared_ptr<VarNode<T>>> pn;
  for (const auto& x : xs) pn.push_back(x.node());
  return detail::make_op<T>(std::move(out), xs, [pn, sizes, sp](VarNode<T>& n) {
    int64_t off = 0;
    for (size_t k = 0; k < pn.size(); ++k) {
      int64_t ax = sizes[k];
      if (pn[k]->requires_grad) {
        auto& d = pn[k]->ensure_grad();
        for (int64_t o = 0; o < sp.outer; ++o) {
          const T* g = n.grad.data() + (o * sp.axis + off) * sp.inner;
          T* dst = d.data() + o * ax * sp.inner;
          for (int64_t i = 0; i < ax * sp.inner; ++i) dst[i] += g[i];
        }
      }
      off += ax;
    }
  });
}

template <typename T>
Var<T> slice(const Var<T>& x, size_t axis, int64_t start, int64_t len) {
  if (axis >= x.shape().size()) throw std::invalid_argument("slice: bad axis");
  if (start < 0 || len <= 0 || start + len > x.shape()[axis])
    throw std::invalid_argument("slice: out of range");
  Shape os = x.shape();
  os[axis] = len;
  auto sp = detail::axis_split(x.shape(), axis);
  NdArray<T> out(os);
  for (int64_t o = 0; o < sp.outer; ++o) {
    const T* src = x.val().data() + (o * sp.axis + start) * sp.inner;
    T* dst = out.data() + o * len * sp.inner;
    std::copy(src, src + len * sp.inner, dst);
  }
  return detail::make_op<T>(std::move(out), {x}, [xn = x.node(), sp, start, len](VarNode<T>& n) {
    auto& d = xn->ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o) {
      const T* g = n.grad.data() + o * len * sp.inner;
      T* dst = d.data() + (o * sp.axis + start) * sp.inner;
      for (int64_t i = 0; i < len * sp.inner; ++i) dst[i] += g[i];
    }
  });
}

// Frequency sub-pixel shuffle: [N, C*r, T, F] -> [N, C, T, F*r],
// out(n, c, t, f*r + k) = in(n, c*r + k, t, f).
template <typename T>
Var<T> pixel_shuffle_freq(const Var<T>& x, int64_t r) {
  if (x.shape().size() != 4) throw std::invalid_argument("pixel_shuffle_freq: rank-4 required");
  int64_t N = x.shape()[0], Cr = x.shape()[1], Tt = x.shape()[2], F = x.shape()[3];
  if (r <= 0 || Cr % r != 0) throw std::invalid_argument("pixel_shuffle_freq: channels not divisible by r");
  int64_t C = Cr / r;
  NdArray<T> out(Shape{N, C, Tt, F * r});
  for (int64_t n0 = 0; n0 < N; ++n0)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t k = 0; k < r; ++k)
        for (int64_t t = 0; t < Tt; ++t) {
          const T* src = x.val().data() + (((n0 * Cr) + c * r + k) * Tt + t) * F;
          T* dst = out.data() + (((n0 * C) + c) * Tt + t) * F * r + k;
          for (int64_t f = 0; f < F; ++f) dst[f * r] = src[f];
        }
  return detail::make_op<T>(std::move(out), {x}, [xn = x.node(), N, C, Cr, Tt, F, r](VarNode<T>& n) {
    auto& d = xn->ensure_grad();
    for (int64_t n0 = 0; n0 < N; ++n0)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t k = 0; k < r; ++k)
          for (int64_t t = 0; t < Tt; ++t) {
            T* dst = d.data() + (((n0 * Cr) + c * r + k) * Tt + t) * F;
            const T* g = n.grad.data() + (((n0 * C) + c) * Tt + t) * F * r + k;
            for (int64_t f = 0; f < F; ++f) dst[f] += g[f * r];
          }
  });
}

}  // namespace sdccrn
