#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sdccrn {

// Iterative radix-2 complex FFT with precomputed twiddles. Sizes are small
// powers of two (transform length == analysis fft_size), so a direct
// Cooley-Tukey pass is plenty; it is templated on scalar because the training
// path runs float and the finite-difference checks run double.
template <typename T>
class FftPlan {
 public:
  explicit FftPlan(int n) : n_(n) {
    if (n < 2 || (n & (n - 1)) != 0) throw std::invalid_argument("FftPlan: size must be a power of two");
    bitrev_.resize(static_cast<size_t>(n));
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b) r |= ((i >> b) & 1) << (log2n - 1 - b);
      bitrev_[static_cast<size_t>(i)] = r;
    }
    tw_re_.resize(static_cast<size_t>(n / 2));
    tw_im_.resize(static_cast<size_t>(n / 2));
    for (int k = 0; k < n / 2; ++k) {
      double ang = -2.0 * M_PI * k / n;
      tw_re_[static_cast<size_t>(k)] = static_cast<T>(std::cos(ang));
      tw_im_[static_cast<size_t>(k)] = static_cast<T>(std::sin(ang));
    }
  }

  int size() const { return n_; }

  // In-place, unnormalized. forward: X_k = sum x_n e^{-i 2 pi k n / N}.
  void forward(T* re, T* im) const { run(re, im, false); }
  // In-place, unnormalized inverse (no 1/N): x_n = sum X_k e^{+i 2 pi k n / N}.
  void inverse(T* re, T* im) const { run(re, im, true); }

 private:
  void run(T* re, T* im, bool inv) const {
    const int n = n_;
    for (int i = 0; i < n; ++i) {
      int j = bitrev_[static_cast<size_t>(i)];
      if (j > i) {
        std::swap(re[i], re[j]);
        std::swap(im[i], im[j]);
      }
    }
    for (int len = 2; len <= n; len <<= 1) {
      const int half = len >> 1;
      const int step = n / len;
      for (int base = 0; base < n; base += len) {
        for (int k = 0; k < half; ++k) {
          const T wr = tw_re_[static_cast<size_t>(k * step)];
          const T wi = inv ? -tw_im_[static_cast<size_t>(k * step)] : tw_im_[static_cast<size_t>(k * step)];
          const int a = base + k;
          const int b = a + half;
          const T xr = re[b] * wr - im[b] * wi;
          const T xi = re[b] * wi + im[b] * wr;
          re[b] = re[a] - xr;
          im[b] = im[a] - xi;
          re[a] += xr;
          im[a] += xi;
        }
      }
    }
  }

  int n_;
  std::vector<int> bitrev_;
  std::vector<T> tw_re_, tw_im_;
};

}  // namespace sdccrn
