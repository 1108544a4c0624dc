#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "sdccrn/array.hpp"

namespace sdccrn {

// Geometry of a 2-d convolution over [C, T, F] slabs (T = frames, F = bins).
// Time padding is asymmetric: pt0 pads the past, pt1 the future; causal layers
// use pt0 = (kt-1)*dt, pt1 = 0 so frame t never sees frames > t.
struct ConvGeom {
  int kt = 1, kf = 1;
  int st = 1, sf = 1;
  int dt = 1, df = 1;
  int pt0 = 0, pt1 = 0;
  int pf0 = 0, pf1 = 0;

  int span_t() const { return (kt - 1) * dt + 1; }
  int span_f() const { return (kf - 1) * df + 1; }
  int64_t out_t(int64_t T) const { return (T + pt0 + pt1 - span_t()) / st + 1; }
  int64_t out_f(int64_t F) const { return (F + pf0 + pf1 - span_f()) / sf + 1; }
  bool valid_for(int64_t T, int64_t F) const {
    return T + pt0 + pt1 >= span_t() && F + pf0 + pf1 >= span_f();
  }
};

namespace convk {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

// x [C, T, F] -> cols [C*kt*kf, OT*OF], row index ((c*kt + it)*kf + jf) to
// match weights stored [Co, Ci, kt, kf].
template <typename T>
void im2col(const T* x, int64_t C, int64_t Tt, int64_t F, const ConvGeom& g, T* cols) {
  const int64_t OT = g.out_t(Tt), OF = g.out_f(F);
  const int64_t P = OT * OF;
  for (int64_t c = 0; c < C; ++c) {
    const T* xc = x + c * Tt * F;
    for (int it = 0; it < g.kt; ++it) {
      for (int jf = 0; jf < g.kf; ++jf) {
        T* row = cols + ((c * g.kt + it) * g.kf + jf) * P;
        for (int64_t ot = 0; ot < OT; ++ot) {
          const int64_t t = ot * g.st + it * g.dt - g.pt0;
          T* dst = row + ot * OF;
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

// Scatter-add of cols back onto the input slab (adjoint of im2col).
template <typename T>
void col2im_add(const T* cols, int64_t C, int64_t Tt, int64_t F, const ConvGeom& g, T* x) {
  const int64_t OT = g.out_t(Tt), OF = g.out_f(F);
  const int64_t P = OT * OF;
  for (int64_t c = 0; c < C; ++c) {
    T* xc = x + c * Tt * F;
    for (int it = 0; it < g.kt; ++it) {
      for (int jf = 0; jf < g.kf; ++jf) {
        const T* row = cols + ((c * g.kt + it) * g.kf + jf) * P;
        for (int64_t ot = 0; ot < OT; ++ot) {
          const int64_t t = ot * g.st + it * g.dt - g.pt0;
          if (t < 0 || t >= Tt) continue;
          T* xt = xc + t * F;
          const T* src = row + ot * OF;
          for (int64_t of = 0; of < OF; ++of) {
            const int64_t f = of * g.sf + jf * g.df - g.pf0;
            if (f >= 0 && f < F) xt[f] += src[of];
          }
        }
      }
    }
  }
}

// Y[Co,P] (+)= W[Co,K] * cols[K,P]
template <typename T>
void gemm(const T* w, int64_t Co, int64_t K, const T* cols, int64_t P, T* y, bool accumulate,
          T sign = T(1)) {
  CMapM<T> W(w, Co, K);
  CMapM<T> C(cols, K, P);
  MapM<T> Y(y, Co, P);
  if (!accumulate)
    Y.noalias() = sign * (W * C);
  else
    Y.noalias() += sign * (W * C);
}

// cols[K,P] (+)= W[Co,K]^T * G[Co,P]
template <typename T>
void gemm_tn(const T* w, int64_t Co, int64_t K, const T* g, int64_t P, T* cols, bool accumulate,
             T sign = T(1)) {
  CMapM<T> W(w, Co, K);
  CMapM<T> G(g, Co, P);
  MapM<T> C(cols, K, P);
  if (!accumulate)
    C.noalias() = sign * (W.transpose() * G);
  else
    C.noalias() += sign * (W.transpose() * G);
}

// gW[Co,K] += sign * G[Co,P] * cols[K,P]^T
template <typename T>
void gemm_nt_add(const T* g, int64_t Co, int64_t P, const T* cols, int64_t K, T* gw, T sign) {
  CMapM<T> G(g, Co, P);
  CMapM<T> C(cols, K, P);
  MapM<T> GW(gw, Co, K);
  GW.noalias() += sign * (G * C.transpose());
}

template <typename T>
void add_bias_rows(T* y, int64_t Co, int64_t P, const T* b) {
  for (int64_t c = 0; c < Co; ++c) {
    const T bv = b[c];
    T* row = y + c * P;
    for (int64_t p = 0; p < P; ++p) row[p] += bv;
  }
}

template <typename T>
void bias_grad_rows(const T* g, int64_t Co, int64_t P, T* gb) {
  for (int64_t c = 0; c < Co; ++c) {
    T s = T(0);
    const T* row = g + c * P;
    for (int64_t p = 0; p < P; ++p) s += row[p];
    gb[c] += s;
  }
}

}  // namespace convk
}  // namespace sdccrn
