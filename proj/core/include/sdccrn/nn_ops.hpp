#pragma once

#include <memory>

#include "sdccrn/autodiff.hpp"
#include "sdccrn/conv_kernels.hpp"

namespace sdccrn {

// Complex tensor as a pair of real tapes. Channel counts are true complex
// widths (config-file channel lists are stacked re/im counts, i.e. 2x these).
template <typename T>
struct CVar {
  Var<T> re, im;

  const Shape& shape() const { return re.shape(); }
  int64_t dim(size_t i) const { return re.shape()[i]; }
};

template <typename T>
CVar<T> cvar_constant(NdArray<T> re, NdArray<T> im) {
  return {Var<T>::constant(std::move(re)), Var<T>::constant(std::move(im))};
}

template <typename T>
CVar<T> cadd(const CVar<T>& a, const CVar<T>& b) {
  return {add(a.re, b.re), add(a.im, b.im)};
}

// Elementwise complex product (mask application).
template <typename T>
CVar<T> cmul(const CVar<T>& a, const CVar<T>& b) {
  return {sub(mul(a.re, b.re), mul(a.im, b.im)), add(mul(a.re, b.im), mul(a.im, b.re))};
}

// |a| with a zero-safe backward (derivative -> 0 at the origin).
template <typename T>
Var<T> cmag(const CVar<T>& a) {
  return sqrt_v(add(mul(a.re, a.re), mul(a.im, a.im)));
}

template <typename T>
CVar<T> cconcat(const std::vector<CVar<T>>& xs, size_t axis) {
  std::vector<Var<T>> re, im;
  for (const auto& x : xs) {
    re.push_back(x.re);
    im.push_back(x.im);
  }
  return {concat(re, axis), concat(im, axis)};
}

template <typename T>
CVar<T> cslice(const CVar<T>& x, size_t axis, int64_t start, int64_t len) {
  return {slice(x.re, axis, start, len), slice(x.im, axis, start, len)};
}

namespace detail {

// GEMM scratch sized to ~8M scalars; conv ops process output-time blocks so
// im2col buffers stay bounded no matter how long the utterance is.
constexpr int64_t kConvBlockScalars = 8 * 1024 * 1024;

template <typename T>
std::vector<T>& conv_scratch(int slot) {
  thread_local std::vector<T> bufs[4];
  return bufs[slot];
}

inline int64_t conv_block_rows(int64_t K, int64_t OF) {
  int64_t rows = kConvBlockScalars / std::max<int64_t>(1, K * OF);
  return std::max<int64_t>(1, rows);
}

// Geometry shifted so that output rows [ot0, ot0+rows) are produced by an
// im2col whose virtual input window starts at time ot0*st - pt0.
template <typename T>
void im2col_tblock(const T* x, int64_t C, int64_t Tt, int64_t F, const ConvGeom& g, int64_t ot0,
                   int64_t rows, T* cols) {
  const int64_t OF = g.out_f(F);
  for (int64_t c = 0; c < C; ++c) {
    const T* xc = x + c * Tt * F;
    for (int it = 0; it < g.kt; ++it) {
      for (int jf = 0; jf < g.kf; ++jf) {
        T* row = cols + ((c * g.kt + it) * g.kf + jf) * (rows * OF);
        for (int64_t r = 0; r < rows; ++r) {
          const int64_t t = (ot0 + r) * g.st + it * g.dt - g.pt0;
          T* dst = row + r * OF;
          if (t < 0 || t >= Tt) {
            for (int64_t of = 0; of < OF; ++of) dst[of] = T(0);
            continue;
          }
          const T* xt = xc + t * F;
          for (int64_t of = 0; of < OF; ++of) {
            const int64_t f = of * g.sf + jf * g.df - g.pf0;
            dst[of] = (f >= 0 && f < F) ? xt[f] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_tblock_add(const T* cols, int64_t C, int64_t Tt, int64_t F, const ConvGeom& g,
                       int64_t ot0, int64_t rows, T* x) {
  const int64_t OF = g.out_f(F);
  for (int64_t c = 0; c < C; ++c) {
    T* xc = x + c * Tt * F;
    for (int it = 0; it < g.kt; ++it) {
      for (int jf = 0; jf < g.kf; ++jf) {
        const T* row = cols + ((c * g.kt + it) * g.kf + jf) * (rows * OF);
        for (int64_t r = 0; r < rows; ++r) {
          const int64_t t = (ot0 + r) * g.st + it * g.dt - g.pt0;
          if (t < 0 || t >= Tt) continue;
          T* xt = xc + t * F;
          const T* src = row + r * OF;
          for (int64_t of = 0; of < OF; ++of) {
            const int64_t f = of * g.sf + jf * g.df - g.pf0;
            if (f >= 0 && f < F) xt[f] += src[of];
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const CVar<T>& x, const Var<T>& wr, const Var<T>& wi, const Var<T>& br,
                     const Var<T>& bi, const char* who) {
  if (x.re.shape().size() != 4) throw std::invalid_argument(std::string(who) + ": input must be [N,C,T,F]");
  if (!(x.re.shape() == x.im.shape()))
    throw std::invalid_argument(std::string(who) + ": re/im shape mismatch");
  if (wr.shape().size() != 4 || !(wr.shape() == wi.shape()))
    throw std::invalid_argument(std::string(who) + ": weight shape mismatch");
  if (br.shape().size() != 1 || !(br.shape() == bi.shape()))
    throw std::invalid_argument(std::string(who) + ": bias shape mismatch");
}

}  // namespace detail

// Complex 2-d convolution: y = (Wr + jWi) * (xr + jxi) + (br + jbi), i.e.
//   yr = Wr*xr - Wi*xi + br,  yi = Wr*xi + Wi*xr + bi.
// x: [N,Ci,T,F], w: [Co,Ci,kt,kf], b: [Co]. Backward recomputes im2col from
// the parents' stored values instead of caching column buffers.
template <typename T>
CVar<T> complex_conv2d(const CVar<T>& x, const Var<T>& wr, const Var<T>& wi, const Var<T>& br,
                       const Var<T>& bi, const ConvGeom& geom) {
  detail::check_conv_args(x, wr, wi, br, bi, "complex_conv2d");
  const int64_t N = x.dim(0), Ci = x.dim(1), Tt = x.dim(2), F = x.dim(3);
  const int64_t Co = wr.shape()[0];
  if (wr.shape()[1] != Ci || wr.shape()[2] != geom.kt || wr.shape()[3] != geom.kf)
    throw std::invalid_argument("complex_conv2d: weight/geometry mismatch with input channels");
  if (br.shape()[0] != Co) throw std::invalid_argument("complex_conv2d: bias/out-channel mismatch");
  if (!geom.valid_for(Tt, F))
    throw std::invalid_argument("complex_conv2d: input smaller than kernel span");
  const int64_t OT = geom.out_t(Tt), OF = geom.out_f(F);
  const int64_t K = Ci * geom.kt * geom.kf;

  NdArray<T> yr(Shape{N, Co, OT, OF});
  NdArray<T> yi(Shape{N, Co, OT, OF});
  {
    const int64_t blk = detail::conv_block_rows(K, OF);
    auto& colsR = detail::conv_scratch<T>(0);
    auto& colsI = detail::conv_scratch<T>(1);
    for (int64_t n = 0; n < N; ++n) {
      const T* xr = x.re.val().data() + n * Ci * Tt * F;
      const T* xi = x.im.val().data() + n * Ci * Tt * F;
      for (int64_t ot0 = 0; ot0 < OT; ot0 += blk) {
        const int64_t rows = std::min(blk, OT - ot0);
        const int64_t P = rows * OF;
        colsR.resize(static_cast<size_t>(K * P));
        colsI.resize(static_cast<size_t>(K * P));
        detail::im2col_tblock(xr, Ci, Tt, F, geom, ot0, rows, colsR.data());
        detail::im2col_tblock(xi, Ci, Tt, F, geom, ot0, rows, colsI.data());
        // GEMM into a compact block then scatter rows: one channel's output
        // rows are contiguous only within the block.
        auto& yblk = detail::conv_scratch<T>(2);
        yblk.resize(static_cast<size_t>(Co * P));
        convk::gemm(wr.val().data(), Co, K, colsR.data(), P, yblk.data(), false);
        convk::gemm(wi.val().data(), Co, K, colsI.data(), P, yblk.data(), true, T(-1));
        for (int64_t c = 0; c < Co; ++c)
          std::copy(yblk.data() + c * P, yblk.data() + (c + 1) * P,
                    yr.data() + ((n * Co + c) * OT + ot0) * OF);
        convk::gemm(wr.val().data(), Co, K, colsI.data(), P, yblk.data(), false);
        convk::gemm(wi.val().data(), Co, K, colsR.data(), P, yblk.data(), true, T(1));
        for (int64_t c = 0; c < Co; ++c)
          std::copy(yblk.data() + c * P, yblk.data() + (c + 1) * P,
                    yi.data() + ((n * Co + c) * OT + ot0) * OF);
      }
      for (int64_t c = 0; c < Co; ++c) {
        convk::add_bias_rows(yr.data() + ((n * Co + c) * OT) * OF, 1, OT * OF,
                             br.val().data() + c);
        convk::add_bias_rows(yi.data() + ((n * Co + c) * OT) * OF, 1, OT * OF,
                             bi.val().data() + c);
      }
    }
  }

  struct Ctx {
    std::shared_ptr<VarNode<T>> xr, xi, wr, wi, b;
    ConvGeom geom;
    int64_t N, Ci, Tt, F, Co, OT, OF, K;
    // sign conventions: y = wsignR * (Wr * xa) + wsignI * (Wi * xb) + b where
    // (xa, xb) = (xr, xi) for the real output and (xi, xr) for the imaginary.
    bool imag_part;
  };

  auto make_backward = [&](bool imag_part, Var<T> bias) {
    Ctx c{x.re.node(), x.im.node(), wr.node(), wi.node(), bias.node(), geom, N, Ci,
          Tt, F, Co, OT, OF, K, imag_part};
    return [c](VarNode<T>& node) {
      const int64_t blk = detail::conv_block_rows(c.K, c.OF);
      auto& colsA = detail::conv_scratch<T>(0);
      auto& colsB = detail::conv_scratch<T>(1);
      auto& gblk = detail::conv_scratch<T>(2);
      auto& gcols = detail::conv_scratch<T>(3);
      // For yr: A = xr (pairs with Wr, +), B = xi (pairs with Wi, -).
      // For yi: A = xi (pairs with Wr, +), B = xr (pairs with Wi, +).
      VarNode<T>* xa = c.imag_part ? c.xi.get() : c.xr.get();
      VarNode<T>* xb = c.imag_part ? c.xr.get() : c.xi.get();
      const T signB = c.imag_part ? T(1) : T(-1);
      const bool need_wr = c.wr->requires_grad;
      const bool need_wi = c.wi->requires_grad;
      const bool need_xa = xa->requires_grad;
      const bool need_xb = xb->requires_grad;
      const bool need_b = c.b->requires_grad;
      if (need_wr) c.wr->ensure_grad();
      if (need_wi) c.wi->ensure_grad();
      if (need_xa) xa->ensure_grad();
      if (need_xb) xb->ensure_grad();
      if (need_b) c.b->ensure_grad();
      for (int64_t n = 0; n < c.N; ++n) {
        const T* va = xa->value.data() + n * c.Ci * c.Tt * c.F;
        const T* vb = xb->value.data() + n * c.Ci * c.Tt * c.F;
        for (int64_t ot0 = 0; ot0 < c.OT; ot0 += blk) {
          const int64_t rows = std::min(blk, c.OT - ot0);
          const int64_t P = rows * c.OF;
          gblk.resize(static_cast<size_t>(c.Co * P));
          for (int64_t ch = 0; ch < c.Co; ++ch)
            std::copy(node.grad.data() + ((n * c.Co + ch) * c.OT + ot0) * c.OF,
                      node.grad.data() + ((n * c.Co + ch) * c.OT + ot0) * c.OF + P,
                      gblk.data() + ch * P);
          if (need_wr || need_wi) {
            colsA.resize(static_cast<size_t>(c.K * P));
            colsB.resize(static_cast<size_t>(c.K * P));
            detail::im2col_tblock(va, c.Ci, c.Tt, c.F, c.geom, ot0, rows, colsA.data());
            detail::im2col_tblock(vb, c.Ci, c.Tt, c.F, c.geom, ot0, rows, colsB.data());
            if (need_wr)
              convk::gemm_nt_add(gblk.data(), c.Co, P, colsA.data(), c.K,
                                 c.wr->grad.data(), T(1));
            if (need_wi)
              convk::gemm_nt_add(gblk.data(), c.Co, P, colsB.data(), c.K,
                                 c.wi->grad.data(), signB);
          }
          if (need_xa) {
            gcols.resize(static_cast<size_t>(c.K * P));
            convk::gemm_tn(c.wr->value.data(), c.Co, c.K, gblk.data(), P, gcols.data(), false);
            detail::col2im_tblock_add(gcols.data(), c.Ci, c.Tt, c.F, c.geom, ot0, rows,
                                      xa->grad.data() + n * c.Ci * c.Tt * c.F);
          }
          if (need_xb) {
            gcols.resize(static_cast<size_t>(c.K * P));
            convk::gemm_tn(c.wi->value.data(), c.Co, c.K, gblk.data(), P, gcols.data(), false,
                           signB);
            detail::col2im_tblock_add(gcols.data(), c.Ci, c.Tt, c.F, c.geom, ot0, rows,
                                      xb->grad.data() + n * c.Ci * c.Tt * c.F);
          }
          if (need_b) convk::bias_grad_rows(gblk.data(), c.Co, P, c.b->grad.data());
        }
      }
    };
  };

  Var<T> out_r = detail::make_op<T>(std::move(yr), {x.re, x.im, wr, wi, br},
                                    make_backward(false, br));
  Var<T> out_i = detail::make_op<T>(std::move(yi), {x.re, x.im, wr, wi, bi},
                                    make_backward(true, bi));
  return {out_r, out_i};
}

// Complex transposed convolution, realized as the adjoint map of a real
// convolution geometry. The layer maps A -> B channels with weights stored
// conv-style as [A, B, kt, kf]; output spatial size is supplied explicitly
// (out_t, out_f) and must satisfy geom.out_*(out) == input size, which is how
// decoder layers mirror encoder sizes exactly (frequency cropping included).
//   yr = tc(xr, Wr) - tc(xi, Wi) + br,  yi = tc(xi, Wr) + tc(xr, Wi) + bi.
template <typename T>
CVar<T> complex_tconv2d(const CVar<T>& x, const Var<T>& wr, const Var<T>& wi, const Var<T>& br,
                        const Var<T>& bi, const ConvGeom& geom, int64_t out_t, int64_t out_f) {
  detail::check_conv_args(x, wr, wi, br, bi, "complex_tconv2d");
  const int64_t N = x.dim(0), A = x.dim(1), Tt = x.dim(2), F = x.dim(3);
  const int64_t B = wr.shape()[1];
  if (wr.shape()[0] != A || wr.shape()[2] != geom.kt || wr.shape()[3] != geom.kf)
    throw std::invalid_argument("complex_tconv2d: weight shape mismatch");
  if (br.shape()[0] != B) throw std::invalid_argument("complex_tconv2d: bias/out-channel mismatch");
  if (geom.out_t(out_t) != Tt || geom.out_f(out_f) != F)
    throw std::invalid_argument("complex_tconv2d: output size inconsistent with geometry");
  const int64_t K = B * geom.kt * geom.kf;
  const int64_t P = Tt * F;

  NdArray<T> yr(Shape{N, B, out_t, out_f});
  NdArray<T> yi(Shape{N, B, out_t, out_f});
  {
    auto& gcols = detail::conv_scratch<T>(0);
    gcols.resize(static_cast<size_t>(K * P));
    for (int64_t n = 0; n < N; ++n) {
      const T* xr = x.re.val().data() + n * A * P;
      const T* xi = x.im.val().data() + n * A * P;
      T* oyr = yr.data() + n * B * out_t * out_f;
      T* oyi = yi.data() + n * B * out_t * out_f;
      convk::gemm_tn(wr.val().data(), A, K, xr, P, gcols.data(), false);
      convk::gemm_tn(wi.val().data(), A, K, xi, P, gcols.data(), true, T(-1));
      convk::col2im_add(gcols.data(), B, out_t, out_f, geom, oyr);
      convk::gemm_tn(wr.val().data(), A, K, xi, P, gcols.data(), false);
      convk::gemm_tn(wi.val().data(), A, K, xr, P, gcols.data(), true, T(1));
      convk::col2im_add(gcols.data(), B, out_t, out_f, geom, oyi);
      for (int64_t c = 0; c < B; ++c) {
        convk::add_bias_rows(oyr + c * out_t * out_f, 1, out_t * out_f, br.val().data() + c);
        convk::add_bias_rows(oyi + c * out_t * out_f, 1, out_t * out_f, bi.val().data() + c);
      }
    }
  }

  struct Ctx {
    std::shared_ptr<VarNode<T>> xr, xi, wr, wi, b;
    ConvGeom geom;
    int64_t N, A, B, Tt, F, out_t, out_f, K, P;
    bool imag_part;
  };
  auto make_backward = [&](bool imag_part, Var<T> bias) {
    Ctx c{x.re.node(), x.im.node(), wr.node(), wi.node(), bias.node(), geom, N, A, B,
          Tt, F, out_t, out_f, K, P, imag_part};
    return [c](VarNode<T>& node) {
      auto& gc = detail::conv_scratch<T>(0);
      gc.resize(static_cast<size_t>(c.K * c.P));
      VarNode<T>* xa = c.imag_part ? c.xi.get() : c.xr.get();
      VarNode<T>* xb = c.imag_part ? c.xr.get() : c.xi.get();
      const T signB = c.imag_part ? T(1) : T(-1);
      const bool need_wr = c.wr->requires_grad;
      const bool need_wi = c.wi->requires_grad;
      const bool need_xa = xa->requires_grad;
      const bool need_xb = xb->requires_grad;
      const bool need_b = c.b->requires_grad;
      if (need_wr) c.wr->ensure_grad();
      if (need_wi) c.wi->ensure_grad();
      if (need_xa) xa->ensure_grad();
      if (need_xb) xb->ensure_grad();
      if (need_b) c.b->ensure_grad();
      const int64_t OP = c.out_t * c.out_f;
      for (int64_t n = 0; n < c.N; ++n) {
        const T* g = node.grad.data() + n * c.B * OP;
        // im2col of the upstream grad under the same geometry.
        convk::im2col(g, c.B, c.out_t, c.out_f, c.geom, gc.data());
        if (need_xa)
          convk::gemm(c.wr->value.data(), c.A, c.K, gc.data(), c.P,
                      xa->grad.data() + n * c.A * c.P, true, T(1));
        if (need_xb)
          convk::gemm(c.wi->value.data(), c.A, c.K, gc.data(), c.P,
                      xb->grad.data() + n * c.A * c.P, true, signB);
        if (need_wr)
          convk::gemm_nt_add(xa->value.data() + n * c.A * c.P, c.A, c.P, gc.data(), c.K,
                             c.wr->grad.data(), T(1));
        if (need_wi)
          convk::gemm_nt_add(xb->value.data() + n * c.A * c.P, c.A, c.P, gc.data(), c.K,
                             c.wi->grad.data(), signB);
        if (need_b) convk::bias_grad_rows(g, c.B, OP, c.b->grad.data());
      }
    };
  };

  Var<T> out_r = detail::make_op<T>(std::move(yr), {x.re, x.im, wr, wi, br},
                                    make_backward(false, br));
  Var<T> out_i = detail::make_op<T>(std::move(yi), {x.re, x.im, wr, wi, bi},
                                    make_backward(true, bi));
  return {out_r, out_i};
}

// Single-layer LSTM over [N, T, D] -> [N, T, H]; gate order (i, f, g, o),
// c_t = f.c_{t-1} + i.g, h_t = o.tanh(c_t). Used on the stacked re/im
// bottleneck feature, so it is a real recurrence.
template <typename T>
Var<T> lstm_layer(const Var<T>& x, const Var<T>& wih, const Var<T>& whh, const Var<T>& bih,
                  const Var<T>& bhh, const Var<T>& h0, const Var<T>& c0) {
  if (x.shape().size() != 3) throw std::invalid_argument("lstm: input must be [N,T,D]");
  const int64_t N = x.shape()[0], Tt = x.shape()[1], D = x.shape()[2];
  const int64_t H4 = wih.shape()[0], H = H4 / 4;
  if (H4 % 4 != 0 || wih.shape()[1] != D) throw std::invalid_argument("lstm: wih must be [4H,D]");
  if (whh.shape()[0] != H4 || whh.shape()[1] != H) throw std::invalid_argument("lstm: whh must be [4H,H]");
  if (bih.shape()[0] != H4 || bhh.shape()[0] != H4) throw std::invalid_argument("lstm: bias must be [4H]");
  if (h0.shape()[0] != N || h0.shape()[1] != H || c0.shape()[0] != N || c0.shape()[1] != H)
    throw std::invalid_argument("lstm: state must be [N,H]");

  struct Cache {
    NdArray<T> gates;  // [N,T,4H] post-activation (i,f,g,o)
    NdArray<T> c;      // [N,T,H]
  };
  auto cache = std::make_shared<Cache>();
  cache->gates = NdArray<T>(Shape{N, Tt, H4});
  cache->c = NdArray<T>(Shape{N, Tt, H});
  NdArray<T> y(Shape{N, Tt, H});

  {
    // pre = x . wih^T for all steps at once.
    NdArray<T> pre(Shape{N, Tt, H4});
    convk::CMapM<T> X(x.val().data(), N * Tt, D);
    convk::CMapM<T> Wih(wih.val().data(), H4, D);
    convk::MapM<T> Pre(pre.data(), N * Tt, H4);
    Pre.noalias() = X * Wih.transpose();
    convk::CMapM<T> Whh(whh.val().data(), H4, H);
    std::vector<T> ht(static_cast<size_t>(N * H)), ct(static_cast<size_t>(N * H));
    std::copy(h0.val().data(), h0.val().data() + N * H, ht.data());
    std::copy(c0.val().data(), c0.val().data() + N * H, ct.data());
    std::vector<T> gbuf(static_cast<size_t>(N * H4));
    for (int64_t t = 0; t < Tt; ++t) {
      convk::MapM<T> G(gbuf.data(), N, H4);
      convk::CMapM<T> Ht(ht.data(), N, H);
      for (int64_t n = 0; n < N; ++n)
        std::copy(pre.data() + (n * Tt + t) * H4, pre.data() + (n * Tt + t) * H4 + H4,
                  gbuf.data() + n * H4);
      G.noalias() += Ht * Whh.transpose();
      for (int64_t n = 0; n < N; ++n) {
        T* g = gbuf.data() + n * H4;
        const T* bi_ = bih.val().data();
        const T* bh_ = bhh.val().data();
        T* gc = cache->gates.data() + (n * Tt + t) * H4;
        T* cc = cache->c.data() + (n * Tt + t) * H;
        T* hy = y.data() + (n * Tt + t) * H;
        T* hn = ht.data() + n * H;
        T* cn = ct.data() + n * H;
        for (int64_t k = 0; k < H; ++k) {
          const T gi = g[k] + bi_[k] + bh_[k];
          const T gf = g[H + k] + bi_[H + k] + bh_[H + k];
          const T gg = g[2 * H + k] + bi_[2 * H + k] + bh_[2 * H + k];
          const T go = g[3 * H + k] + bi_[3 * H + k] + bh_[3 * H + k];
          const T iv = T(1) / (T(1) + std::exp(-gi));
          const T fv = T(1) / (T(1) + std::exp(-gf));
          const T gv = std::tanh(gg);
          const T ov = T(1) / (T(1) + std::exp(-go));
          const T cv = fv * cn[k] + iv * gv;
          gc[k] = iv;
          gc[H + k] = fv;
          gc[2 * H + k] = gv;
          gc[3 * H + k] = ov;
          cc[k] = cv;
          cn[k] = cv;
          const T hv = ov * std::tanh(cv);
          hy[k] = hv;
          hn[k] = hv;
        }
      }
    }
  }

  struct Ctx {
    std::shared_ptr<VarNode<T>> x, wih, whh, bih, bhh, h0, c0;
    std::shared_ptr<Cache> cache;
    int64_t N, Tt, D, H;
  };
  Ctx c{x.node(), wih.node(), whh.node(), bih.node(), bhh.node(), h0.node(), c0.node(),
        cache, N, Tt, D, H};
  return detail::make_op<T>(
      std::move(y), {x, wih, whh, bih, bhh, h0, c0}, [c](VarNode<T>& node) {
        const int64_t N = c.N, Tt = c.Tt, D = c.D, H = c.H, H4 = 4 * c.H;
        NdArray<T> dgates(Shape{N, Tt, H4});
        std::vector<T> dh(static_cast<size_t>(N * H), T(0));
        std::vector<T> dc(static_cast<size_t>(N * H), T(0));
        convk::CMapM<T> Whh(c.whh->value.data(), H4, H);
        std::vector<T> dhprev(static_cast<size_t>(N * H));
        for (int64_t t = Tt - 1; t >= 0; --t) {
          for (int64_t n = 0; n < N; ++n) {
            const T* gy = node.grad.data() + (n * Tt + t) * H;
            const T* gc = c.cache->gates.data() + (n * Tt + t) * H4;
            const T* cc = c.cache->c.data() + (n * Tt + t) * H;
            const T* cprev = t > 0 ? c.cache->c.data() + (n * Tt + t - 1) * H
                                   : c.c0->value.data() + n * H;
            T* dg = dgates.data() + (n * Tt + t) * H4;
            T* dhn = dh.data() + n * H;
            T* dcn = dc.data() + n * H;
            for (int64_t k = 0; k < H; ++k) {
              const T iv = gc[k], fv = gc[H + k], gv = gc[2 * H + k], ov = gc[3 * H + k];
              const T tc = std::tanh(cc[k]);
              const T dht = dhn[k] + gy[k];
              const T dct = dcn[k] + dht * ov * (T(1) - tc * tc);
              const T dov = dht * tc;
              const T div_ = dct * gv;
              const T dgv = dct * iv;
              const T dfv = dct * cprev[k];
              dcn[k] = dct * fv;
              dg[k] = div_ * iv * (T(1) - iv);
              dg[H + k] = dfv * fv * (T(1) - fv);
              dg[2 * H + k] = dgv * (T(1) - gv * gv);
              dg[3 * H + k] = dov * ov * (T(1) - ov);
            }
          }
          // dh_{t-1} = dgates_t . Whh
          {
            convk::MapM<T> DH(dhprev.data(), N, H);
            std::vector<T> dgt(static_cast<size_t>(N * H4));
            for (int64_t n = 0; n < N; ++n)
              std::copy(dgates.data() + (n * Tt + t) * H4,
                        dgates.data() + (n * Tt + t) * H4 + H4, dgt.data() + n * H4);
            convk::CMapM<T> DGt(dgt.data(), N, H4);
            DH.noalias() = DGt * Whh;
            std::copy(dhprev.data(), dhprev.data() + N * H, dh.data());
          }
        }
        if (c.x->requires_grad) {
          auto& gx = c.x->ensure_grad();
          convk::CMapM<T> DG(dgates.data(), N * Tt, H4);
          convk::CMapM<T> Wih(c.wih->value.data(), H4, D);
          convk::MapM<T> GX(gx.data(), N * Tt, D);
          GX.noalias() += DG * Wih;
        }
        if (c.wih->requires_grad) {
          auto& gw = c.wih->ensure_grad();
          convk::CMapM<T> DG(dgates.data(), N * Tt, H4);
          convk::CMapM<T> X(c.x->value.data(), N * Tt, D);
          convk::MapM<T> GW(gw.data(), H4, D);
          GW.noalias() += DG.transpose() * X;
        }
        if (c.whh->requires_grad) {
          auto& gw = c.whh->ensure_grad();
          // h_{t-1} sequence: shift of y with h0 at the front.
          NdArray<T> hprev(Shape{N, Tt, H});
          for (int64_t n = 0; n < N; ++n) {
            std::copy(c.h0->value.data() + n * H, c.h0->value.data() + (n + 1) * H,
                      hprev.data() + (n * Tt) * H);
            for (int64_t t = 1; t < Tt; ++t)
              std::copy(node.value.data() + (n * Tt + t - 1) * H,
                        node.value.data() + (n * Tt + t) * H, hprev.data() + (n * Tt + t) * H);
          }
          convk::CMapM<T> DG(dgates.data(), N * Tt, H4);
          convk::CMapM<T> HP(hprev.data(), N * Tt, H);
          convk::MapM<T> GW(gw.data(), H4, H);
          GW.noalias() += DG.transpose() * HP;
        }
        if (c.bih->requires_grad || c.bhh->requires_grad) {
          std::vector<T> gb(static_cast<size_t>(H4), T(0));
          for (int64_t r = 0; r < N * Tt; ++r)
            for (int64_t k = 0; k < H4; ++k) gb[static_cast<size_t>(k)] += dgates[r * H4 + k];
          if (c.bih->requires_grad) {
            auto& g = c.bih->ensure_grad();
            for (int64_t k = 0; k < H4; ++k) g[k] += gb[static_cast<size_t>(k)];
          }
          if (c.bhh->requires_grad) {
            auto& g = c.bhh->ensure_grad();
            for (int64_t k = 0; k < H4; ++k) g[k] += gb[static_cast<size_t>(k)];
          }
        }
        if (c.h0->requires_grad) {
          auto& g = c.h0->ensure_grad();
          for (int64_t i = 0; i < N * H; ++i) g[i] += dh[static_cast<size_t>(i)];
        }
        if (c.c0->requires_grad) {
          auto& g = c.c0->ensure_grad();
          for (int64_t i = 0; i < N * H; ++i) g[i] += dc[static_cast<size_t>(i)];
        }
      });
}

// y = x . W^T + b over the last axis; x [.., D], W [O, D], b [O].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const int64_t D = x.shape().back();
  const int64_t O = w.shape()[0];
  if (w.shape().size() != 2 || w.shape()[1] != D) throw std::invalid_argument("linear: W must be [O,D]");
  if (b.shape().size() != 1 || b.shape()[0] != O) throw std::invalid_argument("linear: b must be [O]");
  const int64_t R = x.numel() / D;
  Shape os = x.shape();
  os.back() = O;
  NdArray<T> y(os);
  {
    convk::CMapM<T> X(x.val().data(), R, D);
    convk::CMapM<T> W(w.val().data(), O, D);
    convk::MapM<T> Y(y.data(), R, O);
    Y.noalias() = X * W.transpose();
    for (int64_t r = 0; r < R; ++r)
      for (int64_t o = 0; o < O; ++o) y[r * O + o] += b.val()[o];
  }
  return detail::make_op<T>(std::move(y), {x, w, b},
                            [xn = x.node(), wn = w.node(), bn = b.node(), R, D, O](VarNode<T>& n) {
                              convk::CMapM<T> G(n.grad.data(), R, O);
                              if (xn->requires_grad) {
                                auto& gx = xn->ensure_grad();
                                convk::CMapM<T> W(wn->value.data(), O, D);
                                convk::MapM<T> GX(gx.data(), R, D);
                                GX.noalias() += G * W;
                              }
                              if (wn->requires_grad) {
                                auto& gw = wn->ensure_grad();
                                convk::CMapM<T> X(xn->value.data(), R, D);
                                convk::MapM<T> GW(gw.data(), O, D);
                                GW.noalias() += G.transpose() * X;
                              }
                              if (bn->requires_grad) {
                                auto& gb = bn->ensure_grad();
                                for (int64_t r = 0; r < R; ++r)
                                  for (int64_t o = 0; o < O; ++o) gb[o] += n.grad[r * O + o];
                              }
                            });
}

// LayerNorm over (C, F) per (n, t) with per-channel affine. Stateless across
// frames, hence streaming-safe.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-8)) {
  if (x.shape().size() != 4) throw std::invalid_argument("layer_norm: input must be [N,C,T,F]");
  const int64_t N = x.shape()[0], C = x.shape()[1], Tt = x.shape()[2], F = x.shape()[3];
  if (gamma.shape().size() != 1 || gamma.shape()[0] != C || beta.shape()[0] != C)
    throw std::invalid_argument("layer_norm: affine params must be [C]");
  const int64_t M = C * F;

  struct Cache {
    NdArray<T> mean, istd;  // [N,T]
  };
  auto cache = std::make_shared<Cache>();
  cache->mean = NdArray<T>(Shape{N, Tt});
  cache->istd = NdArray<T>(Shape{N, Tt});
  NdArray<T> y(x.shape());
  for (int64_t n = 0; n < N; ++n)
    for (int64_t t = 0; t < Tt; ++t) {
      T s = T(0), s2 = T(0);
      for (int64_t c = 0; c < C; ++c) {
        const T* p = x.val().data() + ((n * C + c) * Tt + t) * F;
        for (int64_t f = 0; f < F; ++f) {
          s += p[f];
          s2 += p[f] * p[f];
        }
      }
      const T mu = s / static_cast<T>(M);
      T var = s2 / static_cast<T>(M) - mu * mu;
      if (var < T(0)) var = T(0);
      const T istd = T(1) / std::sqrt(var + eps);
      cache->mean[n * Tt + t] = mu;
      cache->istd[n * Tt + t] = istd;
      for (int64_t c = 0; c < C; ++c) {
        const T* p = x.val().data() + ((n * C + c) * Tt + t) * F;
        T* q = y.data() + ((n * C + c) * Tt + t) * F;
        const T g = gamma.val()[c], b = beta.val()[c];
        for (int64_t f = 0; f < F; ++f) q[f] = (p[f] - mu) * istd * g + b;
      }
    }

  return detail::make_op<T>(
      std::move(y), {x, gamma, beta},
      [xn = x.node(), gn = gamma.node(), bn = beta.node(), cache, N, C, Tt, F,
       M](VarNode<T>& node) {
        const bool need_x = xn->requires_grad;
        const bool need_g = gn->requires_grad;
        const bool need_b = bn->requires_grad;
        if (need_x) xn->ensure_grad();
        if (need_g) gn->ensure_grad();
        if (need_b) bn->ensure_grad();
        for (int64_t n = 0; n < N; ++n)
          for (int64_t t = 0; t < Tt; ++t) {
            const T mu = cache->mean[n * Tt + t];
            const T istd = cache->istd[n * Tt + t];
            // s1 = sum(dy*gamma), s2 = sum(dy*gamma*xhat)
            T s1 = T(0), s2 = T(0);
            for (int64_t c = 0; c < C; ++c) {
              const T g = gn->value[c];
              const T* dy = node.grad.data() + ((n * C + c) * Tt + t) * F;
              const T* xv = xn->value.data() + ((n * C + c) * Tt + t) * F;
              for (int64_t f = 0; f < F; ++f) {
                const T xh = (xv[f] - mu) * istd;
                s1 += dy[f] * g;
                s2 += dy[f] * g * xh;
              }
            }
            s1 /= static_cast<T>(M);
            s2 /= static_cast<T>(M);
            for (int64_t c = 0; c < C; ++c) {
              const T g = gn->value[c];
              const T* dy = node.grad.data() + ((n * C + c) * Tt + t) * F;
              const T* xv = xn->value.data() + ((n * C + c) * Tt + t) * F;
              T* gx = need_x ? xn->grad.data() + ((n * C + c) * Tt + t) * F : nullptr;
              T gsum = T(0), gxsum = T(0);
              for (int64_t f = 0; f < F; ++f) {
                const T xh = (xv[f] - mu) * istd;
                if (need_x) gx[f] += istd * (dy[f] * g - s1 - xh * s2);
                gsum += dy[f];
                gxsum += dy[f] * xh;
              }
              if (need_g) gn->grad[c] += gxsum;
              if (need_b) bn->grad[c] += gsum;
            }
          }
      });
}

// BatchNorm per channel over (N, T, F). Running stats live outside the tape;
// `training` selects batch statistics (and updates running) vs running stats.
template <typename T>
struct BatchNormState {
  NdArray<T> running_mean, running_var;
  T momentum = T(0.1);
  int64_t steps = 0;
};

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormState<T>* state, bool training, T eps = T(1e-8)) {
  if (x.shape().size() != 4) throw std::invalid_argument("batch_norm: input must be [N,C,T,F]");
  const int64_t N = x.shape()[0], C = x.shape()[1], Tt = x.shape()[2], F = x.shape()[3];
  if (gamma.shape()[0] != C || beta.shape()[0] != C)
    throw std::invalid_argument("batch_norm: affine params must be [C]");
  const int64_t M = N * Tt * F;

  NdArray<T> mean(Shape{C}), istd(Shape{C});
  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      T s = T(0), s2 = T(0);
      for (int64_t n = 0; n < N; ++n) {
        const T* p = x.val().data() + ((n * C + c) * Tt) * F;
        for (int64_t i = 0; i < Tt * F; ++i) {
          s += p[i];
          s2 += p[i] * p[i];
        }
      }
      const T mu = s / static_cast<T>(M);
      T var = s2 / static_cast<T>(M) - mu * mu;
      if (var < T(0)) var = T(0);
      mean[c] = mu;
      istd[c] = T(1) / std::sqrt(var + eps);
      if (state) {
        const T unbiased = M > 1 ? var * static_cast<T>(M) / static_cast<T>(M - 1) : var;
        state->running_mean[c] =
            (T(1) - state->momentum) * state->running_mean[c] + state->momentum * mu;
        state->running_var[c] =
            (T(1) - state->momentum) * state->running_var[c] + state->momentum * unbiased;
      }
    }
    if (state) state->steps++;
  } else {
    if (!state) throw std::invalid_argument("batch_norm: inference requires running stats");
    for (int64_t c = 0; c < C; ++c) {
      mean[c] = state->running_mean[c];
      istd[c] = T(1) / std::sqrt(state->running_var[c] + eps);
    }
  }

  NdArray<T> y(x.shape());
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T* p = x.val().data() + ((n * C + c) * Tt) * F;
      T* q = y.data() + ((n * C + c) * Tt) * F;
      const T mu = mean[c], is = istd[c], g = gamma.val()[c], b = beta.val()[c];
      for (int64_t i = 0; i < Tt * F; ++i) q[i] = (p[i] - mu) * is * g + b;
    }

  auto mean_c = std::make_shared<NdArray<T>>(std::move(mean));
  auto istd_c = std::make_shared<NdArray<T>>(std::move(istd));
  return detail::make_op<T>(
      std::move(y), {x, gamma, beta},
      [xn = x.node(), gn = gamma.node(), bn = beta.node(), mean_c, istd_c, training, N, C, Tt, F,
       M](VarNode<T>& node) {
        const bool need_x = xn->requires_grad;
        const bool need_g = gn->requires_grad;
        const bool need_b = bn->requires_grad;
        if (need_x) xn->ensure_grad();
        if (need_g) gn->ensure_grad();
        if (need_b) bn->ensure_grad();
        for (int64_t c = 0; c < C; ++c) {
          const T mu = (*mean_c)[c], is = (*istd_c)[c], g = gn->value[c];
          T s1 = T(0), s2 = T(0), gsum = T(0), gxsum = T(0);
          for (int64_t n = 0; n < N; ++n) {
            const T* dy = node.grad.data() + ((n * C + c) * Tt) * F;
            const T* xv = xn->value.data() + ((n * C + c) * Tt) * F;
            for (int64_t i = 0; i < Tt * F; ++i) {
              const T xh = (xv[i] - mu) * is;
              gsum += dy[i];
              gxsum += dy[i] * xh;
            }
          }
          if (need_g) gn->grad[c] += gxsum;
          if (need_b) bn->grad[c] += gsum;
          if (!need_x) continue;
          if (training) {
            s1 = gsum / static_cast<T>(M);
            s2 = gxsum / static_cast<T>(M);
          }
          for (int64_t n = 0; n < N; ++n) {
            const T* dy = node.grad.data() + ((n * C + c) * Tt) * F;
            const T* xv = xn->value.data() + ((n * C + c) * Tt) * F;
            T* gx = xn->grad.data() + ((n * C + c) * Tt) * F;
            for (int64_t i = 0; i < Tt * F; ++i) {
              if (training) {
                const T xh = (xv[i] - mu) * is;
                gx[i] += is * g * (dy[i] - s1 - xh * s2);
              } else {
                gx[i] += is * g * dy[i];
              }
            }
          }
        }
      });
}

// PReLU with per-channel slope (axis 1 of [N,C,T,F]).
template <typename T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
  if (x.shape().size() != 4) throw std::invalid_argument("prelu: input must be [N,C,T,F]");
  const int64_t N = x.shape()[0], C = x.shape()[1], Tt = x.shape()[2], F = x.shape()[3];
  if (slope.shape().size() != 1 || slope.shape()[0] != C)
    throw std::invalid_argument("prelu: slope must be [C]");
  NdArray<T> y(x.shape());
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T a = slope.val()[c];
      const T* p = x.val().data() + ((n * C + c) * Tt) * F;
      T* q = y.data() + ((n * C + c) * Tt) * F;
      for (int64_t i = 0; i < Tt * F; ++i) q[i] = p[i] > T(0) ? p[i] : a * p[i];
    }
  return detail::make_op<T>(std::move(y), {x, slope},
                            [xn = x.node(), sn = slope.node(), N, C, Tt, F](VarNode<T>& n) {
                              const bool need_x = xn->requires_grad;
                              const bool need_s = sn->requires_grad;
                              if (need_x) xn->ensure_grad();
                              if (need_s) sn->ensure_grad();
                              for (int64_t b = 0; b < N; ++b)
                                for (int64_t c = 0; c < C; ++c) {
                                  const T a = sn->value[c];
                                  const T* dy = n.grad.data() + ((b * C + c) * Tt) * F;
                                  const T* xv = xn->value.data() + ((b * C + c) * Tt) * F;
                                  T* gx = need_x ? xn->grad.data() + ((b * C + c) * Tt) * F : nullptr;
                                  T sa = T(0);
                                  for (int64_t i = 0; i < Tt * F; ++i) {
                                    if (xv[i] > T(0)) {
                                      if (need_x) gx[i] += dy[i];
                                    } else {
                                      if (need_x) gx[i] += a * dy[i];
                                      sa += dy[i] * xv[i];
                                    }
                                  }
                                  if (need_s) sn->grad[c] += sa;
                                }
                            });
}

}  // namespace sdccrn
