#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sdccrn/autodiff.hpp"
#include "sdccrn/fft.hpp"
#include "sdccrn/nn_ops.hpp"

namespace sdccrn {

struct AnalysisConfig {
  int sample_rate = 32000;
  int win_len = 480;  // 15 ms
  int hop = 160;      // 5 ms
  int fft_size = 512;

  int bins() const { return fft_size / 2; }  // retained bins 1..fft/2 (DC dropped)

  void validate() const {
    if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
      throw std::invalid_argument("analysis: fft_size must be a power of two");
    if (win_len <= 0 || win_len > fft_size)
      throw std::invalid_argument("analysis: need 0 < win_len <= fft_size");
    if (hop <= 0 || hop > win_len) throw std::invalid_argument("analysis: need 0 < hop <= win_len");
    if (win_len % hop != 0)
      throw std::invalid_argument("analysis: win_len must be a multiple of hop");
  }

  int64_t frames(int64_t len) const {
    if (len < win_len) throw std::invalid_argument("input too short");
    return (len - win_len) / hop + 1;
  }

  // Square-root periodic Hann; analysis == synthesis window (WOLA).
  template <typename T>
  std::vector<T> window() const {
    std::vector<T> w(static_cast<size_t>(win_len));
    for (int n = 0; n < win_len; ++n)
      w[static_cast<size_t>(n)] =
          static_cast<T>(std::sqrt(0.5 * (1.0 - std::cos(2.0 * M_PI * n / win_len))));
    return w;
  }

  // sum_t hann[n - t*hop] over the fully-overlapped region.
  double cola() const { return static_cast<double>(win_len) / (2.0 * hop); }
};

namespace detail {

template <typename T>
void check_finite_wave(const T* x, int64_t len) {
  for (int64_t i = 0; i < len; ++i)
    if (!std::isfinite(static_cast<double>(x[i])))
      throw std::invalid_argument("non-finite samples");
}

// Left-aligned causal frames; per frame keep bins 1..fft/2 (DC dropped,
// Nyquist retained). Output layout [T, F].
template <typename T>
void stft_frames(const T* x, int64_t len, const AnalysisConfig& cfg, T* out_re, T* out_im) {
  cfg.validate();
  const int64_t Tt = cfg.frames(len);
  const int N = cfg.fft_size, F = cfg.bins();
  const auto w = cfg.template window<T>();
  FftPlan<T> plan(N);
  std::vector<T> re(static_cast<size_t>(N)), im(static_cast<size_t>(N));
  for (int64_t t = 0; t < Tt; ++t) {
    const T* seg = x + t * cfg.hop;
    for (int n = 0; n < cfg.win_len; ++n) re[static_cast<size_t>(n)] = seg[n] * w[static_cast<size_t>(n)];
    std::fill(re.begin() + cfg.win_len, re.end(), T(0));
    std::fill(im.begin(), im.end(), T(0));
    plan.forward(re.data(), im.data());
    for (int k = 1; k <= F; ++k) {
      out_re[t * F + (k - 1)] = re[static_cast<size_t>(k)];
      out_im[t * F + (k - 1)] = im[static_cast<size_t>(k)];
    }
  }
}

// WOLA synthesis. The DC bin is re-inserted as zero and the spectrum is
// completed conjugate-symmetrically; the imaginary part of the Nyquist bin
// has no real-signal interpretation and is ignored. Divides by the COLA
// constant everywhere, so the first/last (win-hop) samples are attenuated
// (callers only assert interior samples). Output cropped/zero-padded to len.
template <typename T>
void istft_frames(const T* in_re, const T* in_im, int64_t Tt, const AnalysisConfig& cfg, T* y,
                  int64_t len) {
  cfg.validate();
  const int N = cfg.fft_size, F = cfg.bins();
  const auto w = cfg.template window<T>();
  const T inv_cola_n = static_cast<T>(1.0 / (cfg.cola() * N));
  FftPlan<T> plan(N);
  std::vector<T> re(static_cast<size_t>(N)), im(static_cast<size_t>(N));
  std::fill(y, y + len, T(0));
  for (int64_t t = 0; t < Tt; ++t) {
    re[0] = T(0);
    im[0] = T(0);
    for (int k = 1; k < F; ++k) {
      re[static_cast<size_t>(k)] = in_re[t * F + (k - 1)];
      im[static_cast<size_t>(k)] = in_im[t * F + (k - 1)];
      re[static_cast<size_t>(N - k)] = in_re[t * F + (k - 1)];
      im[static_cast<size_t>(N - k)] = -in_im[t * F + (k - 1)];
    }
    re[static_cast<size_t>(F)] = in_re[t * F + (F - 1)];
    im[static_cast<size_t>(F)] = T(0);
    plan.inverse(re.data(), im.data());
    const int64_t base = t * cfg.hop;
    for (int n = 0; n < cfg.win_len; ++n) {
      const int64_t idx = base + n;
      if (idx < len) y[idx] += re[static_cast<size_t>(n)] * w[static_cast<size_t>(n)] * inv_cola_n;
    }
  }
}

}  // namespace detail

// Plain (non-autodiff) conveniences on [L] arrays; spectrum layout [T, F].
template <typename T>
void stft(const NdArray<T>& wave, const AnalysisConfig& cfg, NdArray<T>& re, NdArray<T>& im) {
  detail::check_finite_wave(wave.data(), wave.numel());
  const int64_t Tt = cfg.frames(wave.numel());
  re = NdArray<T>(Shape{Tt, cfg.bins()});
  im = NdArray<T>(Shape{Tt, cfg.bins()});
  detail::stft_frames(wave.data(), wave.numel(), cfg, re.data(), im.data());
}

template <typename T>
NdArray<T> istft(const NdArray<T>& re, const NdArray<T>& im, const AnalysisConfig& cfg,
                 int64_t out_len) {
  if (!(re.shape() == im.shape()) || re.rank() != 2 || re.shape()[1] != cfg.bins())
    throw std::invalid_argument("istft: spectrum must be [T, bins]");
  NdArray<T> y(Shape{out_len});
  detail::istft_frames(re.data(), im.data(), re.shape()[0], cfg, y.data(), out_len);
  return y;
}

// Differentiable analysis: wave [N, L] -> complex feature [N, 1, T, F].
// One linear node carries both parts stacked as [N, 2, T, F]; the adjoint
// scatters each retained bin's gradient back through window-and-FFT.
template <typename T>
CVar<T> stft_op(const Var<T>& wave, const AnalysisConfig& cfg) {
  if (wave.shape().size() != 2) throw std::invalid_argument("stft: wave must be [N, L]");
  cfg.validate();
  const int64_t N = wave.shape()[0], L = wave.shape()[1];
  detail::check_finite_wave(wave.val().data(), wave.numel());
  const int64_t Tt = cfg.frames(L);
  const int64_t F = cfg.bins();

  NdArray<T> s(Shape{N, 2, Tt, F});
  for (int64_t n = 0; n < N; ++n)
    detail::stft_frames(wave.val().data() + n * L, L, cfg, s.data() + (n * 2 + 0) * Tt * F,
                        s.data() + (n * 2 + 1) * Tt * F);

  Var<T> stacked = detail::make_op<T>(
      std::move(s), {wave}, [xn = wave.node(), cfg, N, L, Tt, F](VarNode<T>& node) {
        if (!xn->requires_grad) return;
        auto& gx = xn->ensure_grad();
        const int Nfft = cfg.fft_size;
        const auto w = cfg.template window<T>();
        FftPlan<T> plan(Nfft);
        std::vector<T> re(static_cast<size_t>(Nfft)), im(static_cast<size_t>(Nfft));
        for (int64_t n = 0; n < N; ++n) {
          const T* gr = node.grad.data() + (n * 2 + 0) * Tt * F;
          const T* gi = node.grad.data() + (n * 2 + 1) * Tt * F;
          for (int64_t t = 0; t < Tt; ++t) {
            std::fill(re.begin(), re.end(), T(0));
            std::fill(im.begin(), im.end(), T(0));
            for (int64_t k = 1; k <= F; ++k) {
              re[static_cast<size_t>(k)] = gr[t * F + (k - 1)];
              im[static_cast<size_t>(k)] = gi[t * F + (k - 1)];
            }
            // adjoint of e^{-j..} projection: real part of the unnormalized
            // inverse transform, windowed back onto the frame samples.
            plan.inverse(re.data(), im.data());
            T* dst = gx.data() + n * L + t * cfg.hop;
            for (int i = 0; i < cfg.win_len; ++i) dst[i] += re[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
          }
        }
      });
  Var<T> sr = reshape(slice(stacked, 1, 0, 1), Shape{N, 1, Tt, F});
  Var<T> si = reshape(slice(stacked, 1, 1, 1), Shape{N, 1, Tt, F});
  return {sr, si};
}

// Differentiable synthesis: [N, 1, T, F] complex -> wave [N, out_len].
template <typename T>
Var<T> istft_op(const CVar<T>& z, const AnalysisConfig& cfg, int64_t out_len) {
  if (z.re.shape().size() != 4 || z.dim(1) != 1 || z.dim(3) != cfg.bins())
    throw std::invalid_argument("istft: feature must be [N, 1, T, bins]");
  cfg.validate();
  const int64_t N = z.dim(0), Tt = z.dim(2), F = cfg.bins();

  NdArray<T> y(Shape{N, out_len});
  for (int64_t n = 0; n < N; ++n)
    detail::istft_frames(z.re.val().data() + n * Tt * F, z.im.val().data() + n * Tt * F, Tt, cfg,
                         y.data() + n * out_len, out_len);

  return detail::make_op<T>(
      std::move(y), {z.re, z.im},
      [rn = z.re.node(), in = z.im.node(), cfg, N, Tt, F, out_len](VarNode<T>& node) {
        const bool need_r = rn->requires_grad;
        const bool need_i = in->requires_grad;
        if (!need_r && !need_i) return;
        if (need_r) rn->ensure_grad();
        if (need_i) in->ensure_grad();
        const int Nfft = cfg.fft_size;
        const auto w = cfg.template window<T>();
        const T inv_cola_n = static_cast<T>(1.0 / (cfg.cola() * Nfft));
        FftPlan<T> plan(Nfft);
        std::vector<T> re(static_cast<size_t>(Nfft)), im(static_cast<size_t>(Nfft));
        for (int64_t n = 0; n < N; ++n) {
          const T* gy = node.grad.data() + n * out_len;
          for (int64_t t = 0; t < Tt; ++t) {
            const int64_t base = t * cfg.hop;
            std::fill(re.begin(), re.end(), T(0));
            std::fill(im.begin(), im.end(), T(0));
            for (int i = 0; i < cfg.win_len; ++i) {
              const int64_t idx = base + i;
              re[static_cast<size_t>(i)] =
                  idx < out_len ? gy[idx] * w[static_cast<size_t>(i)] * inv_cola_n : T(0);
            }
            plan.forward(re.data(), im.data());
            // Forward used bins 1..F-1 twice (conjugate pair) and the
            // Nyquist real part once; mirror that weighting here.
            if (need_r) {
              T* gr = rn->grad.data() + n * Tt * F;
              for (int64_t k = 1; k < F; ++k) gr[t * F + (k - 1)] += T(2) * re[static_cast<size_t>(k)];
              gr[t * F + (F - 1)] += re[static_cast<size_t>(F)];
            }
            if (need_i) {
              // d recon / d im_k = -2 sin(theta); forward-FFT imag is -sum(v sin),
              // so the adjoint is +2 * im[k].
              T* gi = in->grad.data() + n * Tt * F;
              for (int64_t k = 1; k < F; ++k) gi[t * F + (k - 1)] += T(2) * im[static_cast<size_t>(k)];
              // Nyquist imaginary part does not reach the output: grad 0.
            }
          }
        }
      });
}

}  // namespace sdccrn
