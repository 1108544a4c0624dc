#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "sdccrn/codec.hpp"
#include "sdccrn/rng.hpp"

using namespace sdccrn;

namespace {

template <typename T>
CVar<T> random_feature(const Shape& s, uint64_t seed) {
  Rng rng(seed);
  NdArray<T> re(s), im(s);
  for (int64_t i = 0; i < re.numel(); ++i) {
    re[i] = static_cast<T>(rng.normal());
    im[i] = static_cast<T>(rng.normal());
  }
  return cvar_constant(std::move(re), std::move(im));
}

bool frames_equal(const CVar<float>& a, const CVar<float>& b, int64_t t) {
  for (int64_t n = 0; n < a.dim(0); ++n)
    for (int64_t c = 0; c < a.dim(1); ++c)
      for (int64_t f = 0; f < a.dim(3); ++f)
        if (a.re.val().at(n, c, t, f) != b.re.val().at(n, c, t, f) ||
            a.im.val().at(n, c, t, f) != b.im.val().at(n, c, t, f))
          return false;
  return true;
}

}  // namespace

TEST_CASE("encoder lifts 1 channel to 16 and halves 256 bins to 128") {
  NoGradGuard ng;
  ParamRegistry<float> reg(1);
  ComplexFeatureEncoder<float> cfe(reg, "cfe", 16, 5);
  auto x = random_feature<float>({2, 1, 3, 256}, 1);
  auto y = cfe.forward(x);
  CHECK((y.re.shape() == Shape{2, 16, 3, 128}));
  CHECK((y.im.shape() == Shape{2, 16, 3, 128}));
}

TEST_CASE("decoder restores 16 channels at 128 bins back to 1 channel at 256") {
  NoGradGuard ng;
  ParamRegistry<float> reg(2);
  ComplexFeatureDecoder<float> cfd(reg, "cfd", 16, 5);
  auto x = random_feature<float>({2, 16, 3, 128}, 2);
  auto y = cfd.forward(x);
  CHECK((y.re.shape() == Shape{2, 1, 3, 256}));
  CHECK((y.im.shape() == Shape{2, 1, 3, 256}));
}

TEST_CASE("encoder then decoder is a shape round trip at reduced size") {
  NoGradGuard ng;
  ParamRegistry<float> reg(3);
  ComplexFeatureEncoder<float> cfe(reg, "cfe", 4, 2);
  ComplexFeatureDecoder<float> cfd(reg, "cfd", 4, 2);
  auto x = random_feature<float>({1, 1, 5, 64}, 3);
  auto y = cfd.forward(cfe.forward(x));
  CHECK((y.re.shape() == Shape{1, 1, 5, 64}));
}

TEST_CASE("all-zero input stays exactly zero through the encoder") {
  NoGradGuard ng;
  ParamRegistry<float> reg(4);
  ComplexFeatureEncoder<float> cfe(reg, "cfe", 8, 3);
  NdArray<float> zr(Shape{1, 1, 4, 32}), zi(Shape{1, 1, 4, 32});
  auto y = cfe.forward(cvar_constant(std::move(zr), std::move(zi)));
  for (int64_t i = 0; i < y.re.numel(); ++i) {
    CHECK(y.re.val()[i] == 0.0f);
    CHECK(y.im.val()[i] == 0.0f);
  }
}

TEST_CASE("encoder is causal: frames before a perturbation are bit-identical") {
  NoGradGuard ng;
  ParamRegistry<float> reg(5);
  ComplexFeatureEncoder<float> cfe(reg, "cfe", 4, 3);
  const int64_t Tt = 40, tp = 25;  // depth-3 dense block spans 8 frames
  auto x = random_feature<float>({1, 1, Tt, 32}, 5);
  auto y0 = cfe.forward(x);

  NdArray<float> re2 = x.re.val(), im2 = x.im.val();
  for (int64_t f = 0; f < 32; ++f) re2.at(int64_t(0), int64_t(0), tp, f) += 2.0f;
  auto y1 = cfe.forward(cvar_constant(std::move(re2), std::move(im2)));

  for (int64_t t = 0; t < tp; ++t) CHECK(frames_equal(y0, y1, t));
  CHECK_FALSE(frames_equal(y0, y1, tp));
}

TEST_CASE("decoder is causal: frames before a perturbation are bit-identical") {
  NoGradGuard ng;
  ParamRegistry<float> reg(6);
  ComplexFeatureDecoder<float> cfd(reg, "cfd", 4, 3);
  Rng r(7);
  for (auto& [name, p] : reg.params)
    if (name.rfind("cfd.out.w", 0) == 0)
      for (int64_t i = 0; i < p.numel(); ++i) p.val()[i] = static_cast<float>(r.uniform(-0.2, 0.2));

  const int64_t Tt = 40, tp = 25;
  auto x = random_feature<float>({1, 4, Tt, 16}, 8);
  auto y0 = cfd.forward(x);
  NdArray<float> re2 = x.re.val(), im2 = x.im.val();
  for (int64_t c = 0; c < 4; ++c)
    for (int64_t f = 0; f < 16; ++f) re2.at(int64_t(0), c, tp, f) += 2.0f;
  auto y1 = cfd.forward(cvar_constant(std::move(re2), std::move(im2)));

  for (int64_t t = 0; t < tp; ++t) CHECK(frames_equal(y0, y1, t));
  CHECK_FALSE(frames_equal(y0, y1, tp));
}

TEST_CASE("fresh decoder outputs exactly zero but still carries gradient") {
  ParamRegistry<float> reg(9);
  ComplexFeatureDecoder<float> cfd(reg, "cfd", 4, 2);
  auto x = random_feature<float>({1, 4, 3, 16}, 9);
  auto y = cfd.forward(x);
  for (int64_t i = 0; i < y.re.numel(); ++i) {
    CHECK(y.re.val()[i] == 0.0f);
    CHECK(y.im.val()[i] == 0.0f);
  }

  backward(add(sum_all(y.re), sum_all(y.im)));
  auto wr = reg.find("cfd.out.wr");
  REQUIRE(wr.has_grad());
  float gmax = 0.0f;
  for (int64_t i = 0; i < wr.grad().numel(); ++i)
    gmax = std::max(gmax, std::abs(wr.grad()[i]));
  CHECK(gmax > 0.0f);
}

TEST_CASE("sub-pixel upsampling avoids the transposed-conv checkerboard") {
  NoGradGuard ng;
  // Period-2 imbalance of per-bin output energy under white complex input.
  // A stride-2 kf=3 transposed conv gives even/odd bins different tap counts;
  // the sub-pixel path fills both phases from iid channels.
  auto artifact = [](const std::function<CVar<float>(const CVar<float>&)>& up, uint64_t seed) {
    std::vector<double> v;
    for (int trial = 0; trial < 4; ++trial) {
      Rng rng(seed + static_cast<uint64_t>(trial));
      NdArray<float> re(Shape{1, 4, 8, 16}), im(Shape{1, 4, 8, 16});
      for (int64_t i = 0; i < re.numel(); ++i) {
        re[i] = static_cast<float>(rng.normal());
        im[i] = static_cast<float>(rng.normal());
      }
      auto y = up(cvar_constant(std::move(re), std::move(im)));
      if (v.empty()) v.assign(static_cast<size_t>(y.dim(3)), 0.0);
      for (int64_t c = 0; c < y.dim(1); ++c)
        for (int64_t t = 2; t < y.dim(2); ++t)  // skip the warm-up frames
          for (int64_t f = 0; f < y.dim(3); ++f)
            v[static_cast<size_t>(f)] += static_cast<double>(y.re.val().at(int64_t(0), c, t, f)) *
                                             y.re.val().at(int64_t(0), c, t, f) +
                                         static_cast<double>(y.im.val().at(int64_t(0), c, t, f)) *
                                             y.im.val().at(int64_t(0), c, t, f);
    }
    double alt = 0.0, tot = 0.0;
    for (size_t f = 2; f + 2 < v.size(); ++f) {  // interior bins only
      alt += (f % 2 ? -v[f] : v[f]);
      tot += v[f];
    }
    return std::abs(alt) / tot;
  };

  double pix_art = 0.0, ref_art = 0.0;
  for (uint64_t rep = 0; rep < 3; ++rep) {
    ParamRegistry<float> rp(100 + rep);
    ComplexPixelConv<float> pix(rp, "pix", 4, 4, 2, conv_geom(3, 2, 1, 1, 1));
    pix_art += artifact([&](const CVar<float>& x) { return pix.forward(x); }, 11 + rep);

    ParamRegistry<float> rt(200 + rep);
    ConvGeom g = conv_geom(3, 2, 2, 1, 1);
    g.pt0 = 0;
    g.pt1 = g.kt - 1;
    ComplexConvTranspose2d<float> ref(rt, "ref", 4, 4, g);
    ref_art += artifact(
        [&](const CVar<float>& x) { return ref.forward(x, x.dim(2), x.dim(3) * 2); }, 21 + rep);
  }
  CHECK(ref_art >= 3.0 * pix_art);
  CHECK(pix_art < 0.2);
}
