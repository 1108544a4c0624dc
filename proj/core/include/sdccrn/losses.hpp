#pragma once

#include "sdccrn/stft.hpp"

namespace sdccrn {

// Scale-invariant SNR in dB, averaged over the batch. Both signals are
// mean-centered; est is projected onto ref: s = (<e,r>/<r,r>) r, e = est - s,
// value = 10 log10((|s|^2+eps)/(|e|^2+eps)).
template <typename T>
Var<T> si_snr_op(const Var<T>& est, const NdArray<T>& ref, T eps = T(1e-8)) {
  if (!(est.shape() == ref.shape()) || est.shape().size() != 2)
    throw std::invalid_argument("si_snr: [N,L] shapes must match");
  const int64_t N = ref.shape()[0], L = ref.shape()[1];

  NdArray<T> ref_c(ref.shape());
  NdArray<T> rr(Shape{N});
  for (int64_t n = 0; n < N; ++n) {
    const T* r = ref.data() + n * L;
    T m = T(0);
    for (int64_t i = 0; i < L; ++i) m += r[i];
    m /= static_cast<T>(L);
    T p = T(0);
    for (int64_t i = 0; i < L; ++i) {
      ref_c[n * L + i] = r[i] - m;
      p += ref_c[n * L + i] * ref_c[n * L + i];
    }
    if (p == T(0)) throw std::invalid_argument("undefined reference");
    rr[n] = p;
  }

  Var<T> refc = Var<T>::constant(std::move(ref_c));
  Var<T> rrv = Var<T>::constant(std::move(rr));
  Var<T> mean = mul_scalar(sum_last(est), T(1) / static_cast<T>(L));
  Var<T> estc = sub_bcast_last(est, mean);
  Var<T> scale = div(sum_last(mul(estc, refc)), rrv);
  Var<T> s_t = mul_bcast_last(refc, scale);
  Var<T> e = sub(estc, s_t);
  Var<T> ratio = div(add_scalar(sum_last(mul(s_t, s_t)), eps),
                     add_scalar(sum_last(mul(e, e)), eps));
  return mean_all(mul_scalar(log_v(ratio), T(10.0 / std::log(10.0))));
}

template <typename T>
T si_snr(const NdArray<T>& est, const NdArray<T>& ref, T eps = T(1e-8)) {
  NoGradGuard guard;
  auto e = Var<T>::constant(est.reshaped(Shape{1, est.numel()}));
  return si_snr_op(e, ref.reshaped(Shape{1, ref.numel()}), eps).val()[0];
}

// Mean absolute complex difference over every bin (the magnitude of X - Xhat
// averaged, an L1 criterion despite the conventional "MSE" name).
template <typename T>
Var<T> cmse_op(const CVar<T>& est, const CVar<T>& ref) {
  if (!(est.re.shape() == ref.re.shape())) throw std::invalid_argument("cmse: shape mismatch");
  CVar<T> d{sub(est.re, ref.re), sub(est.im, ref.im)};
  return mean_all(cmag(d));
}

// KL divergence between magnitude spectra viewed as probability
// distributions: p = (|X|+eps)/sum(|X|+eps) over all bins, value
// sum(p_est * log(p_est / p_ref)) in nats.
template <typename T>
Var<T> kl_div_op(const CVar<T>& est, const NdArray<T>& ref_re, const NdArray<T>& ref_im,
                 T eps = T(1e-8)) {
  if (!(est.re.shape() == ref_re.shape()) || !(ref_re.shape() == ref_im.shape()))
    throw std::invalid_argument("kl_div: shape mismatch");
  const int64_t M = ref_re.numel();

  NdArray<T> logp(Shape{1, M});
  {
    double s = 0.0;
    for (int64_t i = 0; i < M; ++i)
      s += std::sqrt(static_cast<double>(ref_re[i]) * ref_re[i] +
                     static_cast<double>(ref_im[i]) * ref_im[i]) +
           static_cast<double>(eps);
    for (int64_t i = 0; i < M; ++i) {
      const double m = std::sqrt(static_cast<double>(ref_re[i]) * ref_re[i] +
                                 static_cast<double>(ref_im[i]) * ref_im[i]);
      logp[i] = static_cast<T>(std::log((m + eps) / s));
    }
  }

  Var<T> mag = reshape(cmag(est), Shape{1, M});
  Var<T> q = add_scalar(mag, eps);
  Var<T> s = sum_all(q);
  Var<T> ones = Var<T>::constant(NdArray<T>(Shape{1}, T(1)));
  Var<T> p_hat = mul_bcast_last(q, div(ones, s));
  Var<T> logp_hat = sub_bcast_last(log_v(q), log_v(s));
  return sum_all(mul(p_hat, sub(logp_hat, Var<T>::constant(std::move(logp)))));
}

template <typename T>
struct LossReport {
  T si_snr_db = 0, cmse = 0, kl = 0;
  Var<T> total;
};

// Joint objective on waveforms: total = -si_snr + cmse + kl, spectra taken
// in the linear (uncompressed) STFT domain.
template <typename T>
LossReport<T> total_loss(const Var<T>& est_wave, const NdArray<T>& ref_wave,
                         const AnalysisConfig& cfg) {
  if (!(est_wave.shape() == ref_wave.shape()) || ref_wave.shape().size() != 2)
    throw std::invalid_argument("total_loss: [N,L] shapes must match");
  const int64_t N = ref_wave.shape()[0], L = ref_wave.shape()[1];
  const int64_t Tt = cfg.frames(L), F = cfg.bins();

  Var<T> si = si_snr_op(est_wave, ref_wave);
  CVar<T> est_spec = stft_op(est_wave, cfg);

  NdArray<T> rre(Shape{N, 1, Tt, F}), rim(Shape{N, 1, Tt, F});
  for (int64_t n = 0; n < N; ++n)
    detail::stft_frames(ref_wave.data() + n * L, L, cfg, rre.data() + n * Tt * F,
                        rim.data() + n * Tt * F);

  Var<T> cm = cmse_op(est_spec, cvar_constant(rre, rim));

  Var<T> kl_sum;
  for (int64_t n = 0; n < N; ++n) {
    NdArray<T> rr(Shape{1, 1, Tt, F});
    NdArray<T> ri(Shape{1, 1, Tt, F});
    std::copy(rre.data() + n * Tt * F, rre.data() + (n + 1) * Tt * F, rr.data());
    std::copy(rim.data() + n * Tt * F, rim.data() + (n + 1) * Tt * F, ri.data());
    Var<T> k = kl_div_op(cslice(est_spec, 0, n, 1), rr, ri);
    kl_sum = n == 0 ? k : add(kl_sum, k);
  }
  Var<T> kl = mul_scalar(kl_sum, T(1) / static_cast<T>(N));

  LossReport<T> rep;
  rep.si_snr_db = si.val()[0];
  rep.cmse = cm.val()[0];
  rep.kl = kl.val()[0];
  rep.total = add(add(neg(si), cm), kl);
  return rep;
}

}  // namespace sdccrn
