#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sdccrn/losses.hpp"
#include "sdccrn/rng.hpp"

using namespace sdccrn;

namespace {

NdArray<double> noise_vec(int64_t n, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  NdArray<double> x(Shape{n});
  for (int64_t i = 0; i < n; ++i) x[i] = rng.normal() * scale;
  return x;
}

CVar<double> one_bin(double re, double im) {
  return cvar_constant(NdArray<double>(Shape{1, 1, 1, 1}, re), NdArray<double>(Shape{1, 1, 1, 1}, im));
}

}  // namespace

TEST_CASE("si-snr of a signal against itself is epsilon-limited but huge") {
  NdArray<double> x = noise_vec(32000, 1);
  // normalize to unit power so the epsilon bound is the documented >= 80 dB
  double p = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) p += x[i] * x[i];
  p = std::sqrt(p / static_cast<double>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) x[i] /= p;
  CHECK(si_snr<double>(x, x) >= 80.0);
}

TEST_CASE("si-snr is exactly scale-invariant in the estimate") {
  NdArray<double> ref = noise_vec(4000, 2);
  NdArray<double> est = noise_vec(4000, 3);
  for (int64_t i = 0; i < est.numel(); ++i) est[i] = ref[i] + 0.3 * est[i];
  NdArray<double> est2 = est;
  for (int64_t i = 0; i < est2.numel(); ++i) est2[i] *= 2.0;
  NdArray<double> est5 = est;
  for (int64_t i = 0; i < est5.numel(); ++i) est5[i] *= 0.2;

  // exact up to the 1e-8 smoothing terms inside the projection
  const double v = si_snr<double>(est, ref);
  CHECK(si_snr<double>(est2, ref) == doctest::Approx(v).epsilon(1e-9));
  CHECK(si_snr<double>(est5, ref) == doctest::Approx(v).epsilon(1e-9));
}

TEST_CASE("orthogonal noise at power ratio 10 gives exactly 10 dB") {
  const int64_t n = 8000;
  NdArray<double> ref = noise_vec(n, 4);
  double m = 0.0;
  for (int64_t i = 0; i < n; ++i) m += ref[i];
  m /= static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i) ref[i] -= m;

  // Gram-Schmidt a noise vector against the (centered) reference.
  NdArray<double> nz = noise_vec(n, 5);
  m = 0.0;
  for (int64_t i = 0; i < n; ++i) m += nz[i];
  m /= static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i) nz[i] -= m;
  double dot = 0.0, rr = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    dot += nz[i] * ref[i];
    rr += ref[i] * ref[i];
  }
  double nn = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    nz[i] -= dot / rr * ref[i];
    nn += nz[i] * nz[i];
  }
  const double g = std::sqrt(rr / (10.0 * nn));  // ||ref||^2 / ||g n||^2 = 10
  NdArray<double> est = ref;
  for (int64_t i = 0; i < n; ++i) est[i] += g * nz[i];

  CHECK(si_snr<double>(est, ref) == doctest::Approx(10.0).epsilon(1e-4));
}

TEST_CASE("an all-zero reference is rejected") {
  NdArray<double> est = noise_vec(100, 6);
  NdArray<double> ref(Shape{100});
  CHECK_THROWS_WITH_AS((void)si_snr<double>(est, ref), "undefined reference", std::invalid_argument);
}

TEST_CASE("cmse examples evaluate exactly") {
  // est = ref -> 0
  auto x = one_bin(0.3, -0.4);
  CHECK(cmse_op(x, x).val()[0] == 0.0);
  // X = 1+0i vs 0 -> 1
  CHECK(cmse_op(one_bin(0.0, 0.0), one_bin(1.0, 0.0)).val()[0] == doctest::Approx(1.0));
  // X = 3+4i vs 0 -> 5
  CHECK(cmse_op(one_bin(0.0, 0.0), one_bin(3.0, 4.0)).val()[0] == doctest::Approx(5.0));
}

TEST_CASE("cmse is symmetric and satisfies the triangle inequality") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    NdArray<double> ar(Shape{1, 1, 3, 5}), ai(Shape{1, 1, 3, 5});
    NdArray<double> br(Shape{1, 1, 3, 5}), bi(Shape{1, 1, 3, 5});
    NdArray<double> cr(Shape{1, 1, 3, 5}), ci(Shape{1, 1, 3, 5});
    for (int64_t i = 0; i < ar.numel(); ++i) {
      ar[i] = rng.normal(); ai[i] = rng.normal();
      br[i] = rng.normal(); bi[i] = rng.normal();
      cr[i] = rng.normal(); ci[i] = rng.normal();
    }
    auto a = cvar_constant(ar, ai), b = cvar_constant(br, bi), c = cvar_constant(cr, ci);
    const double ab = cmse_op(a, b).val()[0];
    const double ba = cmse_op(b, a).val()[0];
    const double ac = cmse_op(a, c).val()[0];
    const double cb = cmse_op(c, b).val()[0];
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("kl divergence of identical spectra is ~0 and the two-bin example is 0.1308 nats") {
  Rng rng(9);
  NdArray<double> re(Shape{1, 1, 4, 8}), im(Shape{1, 1, 4, 8});
  for (int64_t i = 0; i < re.numel(); ++i) {
    re[i] = rng.normal();
    im[i] = rng.normal();
  }
  CHECK(std::abs(kl_div_op(cvar_constant(re, im), re, im).val()[0]) < 1e-12);

  // two bins with magnitudes (3,1) vs (1,1): p_hat=(0.75,0.25), p=(0.5,0.5)
  NdArray<double> er(Shape{1, 1, 1, 2}), ei(Shape{1, 1, 1, 2});
  NdArray<double> rr(Shape{1, 1, 1, 2}), ri(Shape{1, 1, 1, 2});
  er[0] = 3.0; er[1] = 1.0;
  rr[0] = 1.0; rr[1] = 1.0;
  const double kl = kl_div_op(cvar_constant(er, ei), rr, ri).val()[0];
  const double expect = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(expect == doctest::Approx(0.1308).epsilon(1e-3));
  CHECK(kl == doctest::Approx(expect).epsilon(1e-6));  // eps-smoothing perturbs slightly
}

TEST_CASE("kl divergence is nonnegative, uniform vs uniform is zero") {
  NdArray<double> ur(Shape{1, 1, 2, 4}, 0.7), ui(Shape{1, 1, 2, 4});
  CHECK(std::abs(kl_div_op(cvar_constant(ur, ui), ur, ui).val()[0]) < 1e-12);

  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    NdArray<double> ar(Shape{1, 1, 3, 4}), ai(Shape{1, 1, 3, 4});
    NdArray<double> br(Shape{1, 1, 3, 4}), bi(Shape{1, 1, 3, 4});
    for (int64_t i = 0; i < ar.numel(); ++i) {
      ar[i] = rng.normal(); ai[i] = rng.normal();
      br[i] = rng.normal(); bi[i] = rng.normal();
    }
    CHECK(kl_div_op(cvar_constant(ar, ai), br, bi).val()[0] >= -1e-12);
  }
}

TEST_CASE("total loss composes as -si_snr + cmse + kl") {
  const AnalysisConfig a;
  const int64_t len = 480 + 160 * 8;
  Rng rng(11);
  NdArray<float> ref(Shape{1, len}), est_arr(Shape{1, len});
  for (int64_t i = 0; i < len; ++i) {
    ref[i] = static_cast<float>(rng.normal() * 0.1);
    est_arr[i] = ref[i] + static_cast<float>(rng.normal() * 0.03);
  }
  auto est = Var<float>::constant(est_arr);
  auto rep = total_loss(est, ref, a);
  CHECK(rep.total.val()[0] ==
        doctest::Approx(-rep.si_snr_db + rep.cmse + rep.kl).epsilon(1e-5));
  CHECK(rep.cmse >= 0.0f);
  CHECK(rep.kl >= -1e-7f);
}

TEST_CASE("all three loss terms are invariant to shifting both signals by a hop multiple") {
  // Circularly shifting by k*hop with zeroed head/tail regions permutes the
  // STFT frame multiset, so every term must be unchanged (double arithmetic).
  const AnalysisConfig a;
  const int64_t len = 480 * 8;
  const int64_t shift = 3 * a.hop;
  Rng rng(12);
  NdArray<double> ref(Shape{1, len}), est(Shape{1, len});
  for (int64_t i = a.win_len; i < len - a.win_len - shift; ++i) {
    ref[i] = rng.normal() * 0.1;
    est[i] = ref[i] + rng.normal() * 0.02;
  }
  NdArray<double> ref_s(Shape{1, len}), est_s(Shape{1, len});
  for (int64_t i = 0; i < len; ++i) {
    ref_s[(i + shift) % len] = ref[i];
    est_s[(i + shift) % len] = est[i];
  }

  auto rep0 = total_loss(Var<double>::constant(est), ref, a);
  auto rep1 = total_loss(Var<double>::constant(est_s), ref_s, a);
  CHECK(rep1.si_snr_db == doctest::Approx(rep0.si_snr_db).epsilon(1e-10));
  CHECK(rep1.cmse == doctest::Approx(rep0.cmse).epsilon(1e-10));
  CHECK(rep1.kl == doctest::Approx(rep0.kl).epsilon(1e-8));
}

TEST_CASE("loss decreases when the estimate moves toward the reference") {
  const AnalysisConfig a;
  const int64_t len = 480 + 160 * 4;
  Rng rng(13);
  NdArray<float> ref(Shape{1, len});
  for (int64_t i = 0; i < len; ++i) ref[i] = static_cast<float>(rng.normal() * 0.1);

  double prev = 1e300;
  for (double mix : {0.0, 0.5, 0.9, 0.99}) {
    NdArray<float> est(Shape{1, len});
    Rng nr(14);
    for (int64_t i = 0; i < len; ++i)
      est[i] = static_cast<float>(mix * ref[i] + (1.0 - mix) * nr.normal() * 0.1);
    auto rep = total_loss(Var<float>::constant(est), ref, a);
    CHECK(static_cast<double>(rep.total.val()[0]) < prev);
    prev = rep.total.val()[0];
  }
}
