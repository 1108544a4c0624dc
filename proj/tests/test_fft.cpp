#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "sdccrn/fft.hpp"
#include "sdccrn/rng.hpp"

using namespace sdccrn;

namespace {

// Oracle: direct O(n^2) DFT in double precision.
void naive_dft(const std::vector<double>& re_in, const std::vector<double>& im_in,
               std::vector<double>& re_out, std::vector<double>& im_out, bool inverse) {
  const size_t n = re_in.size();
  re_out.assign(n, 0.0);
  im_out.assign(n, 0.0);
  const double sign = inverse ? 1.0 : -1.0;
  for (size_t k = 0; k < n; ++k) {
    double sr = 0.0, si = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * M_PI * static_cast<double>(k * j % n) / static_cast<double>(n);
      const double c = std::cos(ang), s = std::sin(ang);
      sr += re_in[j] * c - im_in[j] * s;
      si += re_in[j] * s + im_in[j] * c;
    }
    re_out[k] = sr;
    im_out[k] = si;
  }
}

}  // namespace

TEST_CASE("forward transform matches the direct DFT at every supported size") {
  Rng rng(42);
  for (int n : {2, 4, 8, 16, 64, 256, 512}) {
    std::vector<double> re(static_cast<size_t>(n)), im(static_cast<size_t>(n));
    for (auto& v : re) v = rng.normal();
    for (auto& v : im) v = rng.normal();

    std::vector<double> er, ei;
    naive_dft(re, im, er, ei, false);

    FftPlan<double> plan(n);
    std::vector<double> fr = re, fi = im;
    plan.forward(fr.data(), fi.data());

    double max_err = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i) {
      max_err = std::max(max_err, std::abs(fr[static_cast<size_t>(i)] - er[static_cast<size_t>(i)]));
      max_err = std::max(max_err, std::abs(fi[static_cast<size_t>(i)] - ei[static_cast<size_t>(i)]));
      scale = std::max(scale, std::abs(er[static_cast<size_t>(i)]) + std::abs(ei[static_cast<size_t>(i)]));
    }
    CHECK(max_err / scale < 1e-12);
  }
}

TEST_CASE("inverse transform matches the direct inverse DFT") {
  Rng rng(7);
  const int n = 512;
  std::vector<double> re(static_cast<size_t>(n)), im(static_cast<size_t>(n));
  for (auto& v : re) v = rng.normal();
  for (auto& v : im) v = rng.normal();

  std::vector<double> er, ei;
  naive_dft(re, im, er, ei, true);

  FftPlan<double> plan(n);
  std::vector<double> fr = re, fi = im;
  plan.inverse(fr.data(), fi.data());

  for (int i = 0; i < n; ++i) {
    CHECK(fr[static_cast<size_t>(i)] == doctest::Approx(er[static_cast<size_t>(i)]).epsilon(1e-10));
    CHECK(fi[static_cast<size_t>(i)] == doctest::Approx(ei[static_cast<size_t>(i)]).epsilon(1e-10));
  }
}

TEST_CASE("inverse(forward(x)) recovers n * x (unnormalized pair)") {
  Rng rng(3);
  const int n = 256;
  std::vector<double> re(static_cast<size_t>(n)), im(static_cast<size_t>(n), 0.0);
  for (auto& v : re) v = rng.normal();
  std::vector<double> fr = re, fi = im;

  FftPlan<double> plan(n);
  plan.forward(fr.data(), fi.data());
  plan.inverse(fr.data(), fi.data());

  for (int i = 0; i < n; ++i) {
    CHECK(fr[static_cast<size_t>(i)] / n == doctest::Approx(re[static_cast<size_t>(i)]).epsilon(1e-12));
    CHECK(std::abs(fi[static_cast<size_t>(i)] / n) < 1e-12);
  }
}

TEST_CASE("pure tone concentrates in a single bin") {
  const int n = 512, k = 16;
  std::vector<double> re(static_cast<size_t>(n)), im(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) re[static_cast<size_t>(i)] = std::cos(2.0 * M_PI * k * i / n);

  FftPlan<double> plan(n);
  plan.forward(re.data(), im.data());
  CHECK(re[k] == doctest::Approx(n / 2.0).epsilon(1e-10));
  CHECK(re[static_cast<size_t>(n - k)] == doctest::Approx(n / 2.0).epsilon(1e-10));
  for (int i = 0; i < n; ++i) {
    if (i == k || i == n - k) continue;
    CHECK(std::abs(re[static_cast<size_t>(i)]) < 1e-9);
    CHECK(std::abs(im[static_cast<size_t>(i)]) < 1e-9);
  }
}

TEST_CASE("float plan agrees with double plan") {
  Rng rng(11);
  const int n = 512;
  std::vector<double> dre(static_cast<size_t>(n)), dim(static_cast<size_t>(n));
  std::vector<float> fre(static_cast<size_t>(n)), fim(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    dre[static_cast<size_t>(i)] = rng.normal();
    dim[static_cast<size_t>(i)] = rng.normal();
    fre[static_cast<size_t>(i)] = static_cast<float>(dre[static_cast<size_t>(i)]);
    fim[static_cast<size_t>(i)] = static_cast<float>(dim[static_cast<size_t>(i)]);
  }
  FftPlan<double> dp(n);
  FftPlan<float> fp(n);
  dp.forward(dre.data(), dim.data());
  fp.forward(fre.data(), fim.data());
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(fre[static_cast<size_t>(i)] - dre[static_cast<size_t>(i)]) < 1e-3);
    CHECK(std::abs(fim[static_cast<size_t>(i)] - dim[static_cast<size_t>(i)]) < 1e-3);
  }
}

TEST_CASE("non-power-of-two sizes are rejected") {
  CHECK_THROWS_AS(FftPlan<float>(3), std::invalid_argument);
  CHECK_THROWS_AS(FftPlan<float>(0), std::invalid_argument);
  CHECK_THROWS_AS(FftPlan<float>(100), std::invalid_argument);
}
