#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sdccrn/losses.hpp"
#include "sdccrn/rng.hpp"
#include "sdccrn/stft.hpp"

using namespace sdccrn;

namespace {

// Zero-mean noise band-limited well below Nyquist, so no energy sits in the
// dropped DC bin or at the band edge.
template <typename T>
NdArray<T> bandlimited_noise(int64_t len, uint64_t seed, int max_harm = 180) {
  Rng rng(seed);
  NdArray<T> x(Shape{len});
  for (int h = 2; h < max_harm; ++h) {
    const double a = rng.normal() * 0.05;
    const double ph = rng.uniform(0.0, 2.0 * M_PI);
    const double w = 2.0 * M_PI * h / 512.0;  // harmonics of fs/512
    for (int64_t i = 0; i < len; ++i)
      x[i] += static_cast<T>(a * std::cos(w * static_cast<double>(i) + ph));
  }
  return x;
}

}  // namespace

TEST_CASE("frame count follows the causal framing formula") {
  AnalysisConfig a;
  CHECK(a.frames(32000) == 198);
  CHECK(a.frames(480) == 1);
  CHECK(a.frames(480 + 159) == 1);
  CHECK(a.frames(480 + 160) == 2);
  CHECK_THROWS_WITH_AS(a.frames(479), "input too short", std::invalid_argument);
}

TEST_CASE("defaults: 32 kHz, 480/160/512, 256 bins, COLA 1.5") {
  AnalysisConfig a;
  CHECK(a.sample_rate == 32000);
  CHECK(a.win_len == 480);
  CHECK(a.hop == 160);
  CHECK(a.fft_size == 512);
  CHECK(a.bins() == 256);
  CHECK(a.cola() == doctest::Approx(1.5).epsilon(1e-15));

  // sqrt-Hann window: squared values overlap-add to the COLA constant.
  auto w = a.window<double>();
  for (int n = 0; n < a.hop; ++n) {
    double s = 0.0;
    for (int t = 0; n + t * a.hop < a.win_len; ++t) {
      double v = w[static_cast<size_t>(n + t * a.hop)];
      s += v * v;
    }
    CHECK(s == doctest::Approx(1.5).epsilon(1e-12));
  }
}

namespace {

// The synthesis re-inserts the dropped DC bin as zero, which subtracts each
// frame's window-weighted mean from the reconstruction. That component is
// computable directly (no FFT): interior samples come back as
//   x[i] - sum_t dc_t * w[i - t*hop] / (cola * fft_size),
// with dc_t = sum_n x[t*hop + n] * w[n].
template <typename T>
std::vector<double> expected_round_trip(const NdArray<T>& x, const AnalysisConfig& a) {
  const int64_t len = x.numel(), Tt = a.frames(len);
  const auto w = a.template window<double>();
  std::vector<double> dc(static_cast<size_t>(Tt), 0.0);
  for (int64_t t = 0; t < Tt; ++t)
    for (int n = 0; n < a.win_len; ++n)
      dc[static_cast<size_t>(t)] += static_cast<double>(x[t * a.hop + n]) * w[static_cast<size_t>(n)];
  const double scale = 1.0 / (a.cola() * a.fft_size);
  std::vector<double> e(static_cast<size_t>(len));
  for (int64_t i = 0; i < len; ++i) e[static_cast<size_t>(i)] = static_cast<double>(x[i]);
  for (int64_t t = 0; t < Tt; ++t)
    for (int n = 0; n < a.win_len; ++n)
      e[static_cast<size_t>(t * a.hop + n)] -= dc[static_cast<size_t>(t)] * w[static_cast<size_t>(n)] * scale;
  return e;
}

}  // namespace

TEST_CASE("round trip is identity on interior samples within 1e-6 relative") {
  const AnalysisConfig a;
  const int64_t len = 32000;
  NdArray<float> x = bandlimited_noise<float>(len, 5);

  NdArray<float> re, im;
  stft(x, a, re, im);
  CHECK(re.shape()[0] == 198);
  CHECK(re.shape()[1] == 256);
  NdArray<float> y = istft(re, im, a, len);

  double rms = 0.0;
  for (int64_t i = 0; i < len; ++i) rms += static_cast<double>(x[i]) * x[i];
  rms = std::sqrt(rms / static_cast<double>(len));

  const auto expected = expected_round_trip(x, a);
  double max_err = 0.0, max_leak = 0.0;
  for (int64_t i = a.win_len; i < len - a.win_len; ++i) {
    max_err = std::max(max_err, std::abs(static_cast<double>(y[i]) - expected[static_cast<size_t>(i)]));
    max_leak = std::max(max_leak, std::abs(expected[static_cast<size_t>(i)] - static_cast<double>(x[i])));
  }
  CHECK(max_err / rms < 1e-6);
  // the removed component itself is small for zero-mean band-limited input
  CHECK(max_leak / rms < 0.05);
}

TEST_CASE("round trip in double is exact to 1e-12 relative") {
  const AnalysisConfig a;
  const int64_t len = 16000;
  NdArray<double> x = bandlimited_noise<double>(len, 17);
  NdArray<double> re, im;
  stft(x, a, re, im);
  NdArray<double> y = istft(re, im, a, len);
  double rms = 0.0;
  for (int64_t i = 0; i < len; ++i) rms += x[i] * x[i];
  rms = std::sqrt(rms / static_cast<double>(len));
  const auto expected = expected_round_trip(x, a);
  double max_err = 0.0;
  for (int64_t i = a.win_len; i < len - a.win_len; ++i)
    max_err = std::max(max_err, std::abs(y[i] - expected[static_cast<size_t>(i)]));
  CHECK(max_err / rms < 1e-12);
}

TEST_CASE("all-zero input gives an all-zero spectrogram") {
  const AnalysisConfig a;
  NdArray<float> x(Shape{32000});
  NdArray<float> re, im;
  stft(x, a, re, im);
  CHECK(re.shape()[0] == 198);
  for (int64_t i = 0; i < re.numel(); ++i) {
    CHECK(re[i] == 0.0f);
    CHECK(im[i] == 0.0f);
  }
}

TEST_CASE("1 kHz tone concentrates near FFT bin 16 and survives the round trip") {
  const AnalysisConfig a;
  const int64_t len = 32000;
  NdArray<float> x(Shape{len});
  for (int64_t i = 0; i < len; ++i)
    x[i] = static_cast<float>(std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 32000.0));

  NdArray<float> re, im;
  stft(x, a, re, im);

  // retained-bin index k-1 corresponds to FFT bin k; 1 kHz -> bin 16
  const int kc = 16 - 1;
  const int64_t T = re.shape()[0], F = re.shape()[1];
  for (int64_t t = 10; t < T - 10; ++t) {
    double tot = 0.0, near = 0.0;
    for (int64_t f = 0; f < F; ++f) {
      const double p = static_cast<double>(re.at(t, f)) * re.at(t, f) +
                       static_cast<double>(im.at(t, f)) * im.at(t, f);
      tot += p;
      if (std::abs(f - kc) <= 2) near += p;
    }
    CHECK(near / tot >= 0.95);
  }

  NdArray<float> y = istft(re, im, a, len);
  NdArray<float> xi(Shape{len - 2 * a.win_len}), yi(Shape{len - 2 * a.win_len});
  for (int64_t i = 0; i < xi.numel(); ++i) {
    xi[i] = x[i + a.win_len];
    yi[i] = y[i + a.win_len];
  }
  CHECK(si_snr<float>(yi, xi) >= 60.0f);
}

TEST_CASE("frame t depends only on samples in [t*hop, t*hop + win)") {
  const AnalysisConfig a;
  const int64_t len = 480 + 160 * 9;
  NdArray<float> x = bandlimited_noise<float>(len, 9);
  NdArray<float> re0, im0;
  stft(x, a, re0, im0);

  // Perturb one sample; only frames whose window covers it may change.
  const int64_t p = 480 + 160 * 4 + 37;
  NdArray<float> x2 = x;
  x2[p] += 1.0f;
  NdArray<float> re1, im1;
  stft(x2, a, re1, im1);

  const int64_t F = re0.shape()[1];
  for (int64_t t = 0; t < re0.shape()[0]; ++t) {
    const bool covered = p >= t * a.hop && p < t * a.hop + a.win_len;
    bool changed = false;
    for (int64_t f = 0; f < F; ++f)
      if (re0.at(t, f) != re1.at(t, f) || im0.at(t, f) != im1.at(t, f)) changed = true;
    if (!covered) CHECK_FALSE(changed);  // bit-identical outside the window
    if (covered) CHECK(changed);
  }
}

TEST_CASE("autodiff wrappers reproduce the plain transforms") {
  const AnalysisConfig a;
  const int64_t len = 480 + 160 * 6;
  NdArray<float> x = bandlimited_noise<float>(len, 21);

  NdArray<float> re, im;
  stft(x, a, re, im);

  auto wave = Var<float>::constant(x.reshaped(Shape{1, len}));
  CVar<float> s = stft_op(wave, a);
  CHECK(s.re.shape() == Shape{1, 1, re.shape()[0], re.shape()[1]});
  for (int64_t i = 0; i < re.numel(); ++i) {
    CHECK(s.re.val()[i] == re[i]);
    CHECK(s.im.val()[i] == im[i]);
  }

  NdArray<float> y = istft(re, im, a, len);
  Var<float> yv = istft_op(s, a, len);
  for (int64_t i = 0; i < len; ++i) CHECK(yv.val()[i] == y[i]);
}

TEST_CASE("non-finite samples are rejected") {
  const AnalysisConfig a;
  NdArray<float> x(Shape{1000});
  x[500] = std::numeric_limits<float>::quiet_NaN();
  NdArray<float> re, im;
  CHECK_THROWS_AS(stft(x, a, re, im), std::invalid_argument);
}

TEST_CASE("config validation rejects malformed geometry") {
  AnalysisConfig a;
  a.fft_size = 500;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = AnalysisConfig{};
  a.hop = 170;  // does not divide win_len
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = AnalysisConfig{};
  a.win_len = 600;  // exceeds fft_size
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
}
