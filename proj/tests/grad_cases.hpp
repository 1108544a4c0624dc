// Central-difference gradient checks in double precision for every layer and
// op with a backward pass, ending at the full model + objective. Each case
// returns its worst relative error so callers choose how to report.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdccrn/codec.hpp"
#include "sdccrn/compression.hpp"
#include "sdccrn/dccrn.hpp"
#include "sdccrn/losses.hpp"
#include "sdccrn/model.hpp"
#include "sdccrn/rng.hpp"

namespace gradcases {

using namespace sdccrn;
using D = double;
using Params = std::vector<std::pair<std::string, Var<D>>>;
using ScalarFn = std::function<Var<D>()>;

inline NdArray<D> randn(const Shape& s, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  NdArray<D> a(s);
  for (int64_t i = 0; i < a.numel(); ++i) a[i] = rng.normal() * scale;
  return a;
}

// Fixed random projection to a scalar so the check exercises generic output
// directions. Deterministic in the seed, so repeated evaluations agree.
inline Var<D> project(const Var<D>& y, uint64_t seed) {
  Rng r(seed);
  NdArray<D> w(y.shape());
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = r.normal();
  return sum_all(mul(y, Var<D>::constant(std::move(w))));
}

inline Var<D> project(const CVar<D>& y, uint64_t seed) {
  return add(project(y.re, seed), project(y.im, seed + 1));
}

// Analytic grads from one backward pass vs central differences on a sampled
// subset of coordinates of every parameter. Returns the worst relative error;
// when `worst` is given it records which coordinate produced it.
inline double gradcheck_max_rel(const Params& params, const ScalarFn& f, int coords = 4,
                                double h = 1e-6, std::string* worst = nullptr) {
  for (const auto& [n, p] : params) p.node()->zero_grad();
  Var<D> root = f();
  if (root.numel() != 1) throw std::logic_error("gradcheck target must be scalar");
  backward(root);

  std::vector<NdArray<D>> analytic;
  analytic.reserve(params.size());
  for (const auto& [n, p] : params)
    analytic.push_back(p.has_grad() ? p.grad() : NdArray<D>(p.shape()));

  auto eval = [&f]() {
    NoGradGuard ng;
    return f().val()[0];
  };

  double max_rel = 0.0;
  Rng pick(99);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Var<D> p = params[pi].second;  // non-const view of the shared node
    const int64_t M = p.numel();
    const int64_t n_checks = std::min<int64_t>(coords, M);
    for (int64_t c = 0; c < n_checks; ++c) {
      const int64_t idx = M <= coords ? c : pick.uniform_int(M);
      const double v = p.val()[idx];
      p.val()[idx] = v + h;
      const double fp = eval();
      p.val()[idx] = v - h;
      const double fm = eval();
      p.val()[idx] = v;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic[pi][idx];
      const double rel = std::abs(ana - num) / std::max({1e-3, std::abs(ana), std::abs(num)});
      if (rel > max_rel) {
        max_rel = rel;
        if (worst)
          *worst = params[pi].first + "[" + std::to_string(idx) +
                   "] analytic=" + std::to_string(ana) + " numeric=" + std::to_string(num);
      }
    }
  }
  return max_rel;
}

inline Params with_input(const ParamRegistry<D>& reg,
                         std::initializer_list<std::pair<std::string, Var<D>>> extra) {
  Params ps = reg.params;
  for (auto& e : extra) ps.push_back(e);
  return ps;
}

struct GradCase {
  std::string name;
  std::function<double(std::string*)> run;  // returns worst relative error
};

inline std::vector<GradCase> all_grad_cases() {
  std::vector<GradCase> cases;

  cases.push_back({"complex conv, plain and grouped", [](std::string* w) {
    ParamRegistry<D> reg(101);
    ComplexConv2d<D> conv(reg, "c", 2, 3, conv_geom(3, 2, 2, 1, 1));
    auto xr = Var<D>::param(randn({1, 2, 4, 8}, 1));
    auto xi = Var<D>::param(randn({1, 2, 4, 8}, 2));
    CVar<D> x{xr, xi};
    double e = gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                 [&] { return project(conv.forward(x), 10); }, 4, 1e-6, w);
    return std::max(e, gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                         [&] { return project(conv.forward_grouped(x, 2), 11); },
                                         4, 1e-6, w));
  }});

  cases.push_back({"complex transposed conv, causal decoder geometry", [](std::string* w) {
    ParamRegistry<D> reg(102);
    ConvGeom gd = conv_geom(3, 2, 2, 1, 1);
    gd.pt0 = 0;
    gd.pt1 = gd.kt - 1;
    ComplexConvTranspose2d<D> tc(reg, "t", 3, 2, gd);
    auto xr = Var<D>::param(randn({1, 3, 4, 4}, 3));
    auto xi = Var<D>::param(randn({1, 3, 4, 4}, 4));
    CVar<D> x{xr, xi};
    double e = gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                 [&] { return project(tc.forward(x, 4, 8), 12); }, 4, 1e-6, w);
    return std::max(e,
                    gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                      [&] { return project(tc.forward_grouped(x, 2, 4, 8), 13); },
                                      4, 1e-6, w));
  }});

  cases.push_back({"batch norm, training and inference paths", [](std::string* w) {
    ParamRegistry<D> reg(103);
    ComplexBatchNorm<D> bn(reg, "bn", 3);
    auto xr = Var<D>::param(randn({2, 3, 3, 4}, 5));
    auto xi = Var<D>::param(randn({2, 3, 3, 4}, 6));
    CVar<D> x{xr, xi};
    double e = gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                 [&] { return project(bn.forward(x, true), 14); }, 4, 1e-6, w);
    // non-trivial running stats for the inference path
    for (auto& [name, st] : reg.bn_states) {
      Rng r(7);
      for (int64_t i = 0; i < st->running_mean.numel(); ++i) {
        st->running_mean[i] = r.normal() * 0.3;
        st->running_var[i] = 1.0 + 0.5 * r.uniform();
      }
    }
    return std::max(e, gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                         [&] { return project(bn.forward(x, false), 15); }, 4,
                                         1e-6, w));
  }});

  cases.push_back({"layer norm and prelu", [](std::string* w) {
    ParamRegistry<D> reg(104);
    ComplexLayerNorm<D> ln(reg, "ln", 3);
    ComplexPReLU<D> act(reg, "act", 3);
    auto xr = Var<D>::param(randn({1, 3, 2, 4}, 8));
    auto xi = Var<D>::param(randn({1, 3, 2, 4}, 9));
    CVar<D> x{xr, xi};
    return gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                             [&] { return project(act.forward(ln.forward(x)), 16); }, 4, 1e-6, w);
  }});

  cases.push_back({"bottleneck: lstm stack and linear unstack", [](std::string* w) {
    ParamRegistry<D> reg(105);
    Bottleneck<D> bott(reg, "b", 2, 3, 5, 2);
    auto xr = Var<D>::param(randn({1, 2, 4, 3}, 10));
    auto xi = Var<D>::param(randn({1, 2, 4, 3}, 11));
    CVar<D> x{xr, xi};
    return gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                             [&] { return project(bott.forward(x), 17); }, 4, 1e-6, w);
  }});

  cases.push_back({"dilated dense block", [](std::string* w) {
    ParamRegistry<D> reg(106);
    DenseBlock<D> dense(reg, "d", 2, 2);
    auto xr = Var<D>::param(randn({1, 2, 5, 4}, 12));
    auto xi = Var<D>::param(randn({1, 2, 5, 4}, 13));
    CVar<D> x{xr, xi};
    return gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                             [&] { return project(dense.forward(x), 18); }, 4, 1e-6, w);
  }});

  cases.push_back({"sub-pixel frequency upsampler", [](std::string* w) {
    ParamRegistry<D> reg(107);
    ComplexPixelConv<D> up(reg, "p", 2, 3, 2, conv_geom(3, 2, 1, 1, 1));
    auto xr = Var<D>::param(randn({1, 2, 3, 4}, 14));
    auto xi = Var<D>::param(randn({1, 2, 3, 4}, 15));
    CVar<D> x{xr, xi};
    return gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                             [&] { return project(up.forward(x), 19); }, 4, 1e-6, w);
  }});

  cases.push_back({"feature encoder block", [](std::string* w) {
    ParamRegistry<D> reg(108);
    ComplexFeatureEncoder<D> cfe(reg, "cfe", 4, 1);
    auto xr = Var<D>::param(randn({1, 1, 3, 8}, 16));
    auto xi = Var<D>::param(randn({1, 1, 3, 8}, 17));
    CVar<D> x{xr, xi};
    return gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                             [&] { return project(cfe.forward(x), 20); }, 3, 1e-6, w);
  }});

  cases.push_back({"feature decoder block", [](std::string* w) {
    ParamRegistry<D> reg(109);
    ComplexFeatureDecoder<D> cfd(reg, "cfd", 4, 1);
    // the final projection conv starts at zero; give it weight so gradients
    // reach the upstream layers
    Rng r(21);
    for (auto& [name, p] : reg.params)
      if (name.rfind("cfd.out.w", 0) == 0)
        for (int64_t i = 0; i < p.numel(); ++i) p.val()[i] = r.uniform(-0.2, 0.2);
    auto yr = Var<D>::param(randn({1, 4, 3, 4}, 18));
    auto yi = Var<D>::param(randn({1, 4, 3, 4}, 19));
    CVar<D> y{yr, yi};
    return gradcheck_max_rel(with_input(reg, {{"xr", yr}, {"xi", yi}}),
                             [&] { return project(cfd.forward(y), 22); }, 3, 1e-6, w);
  }});

  for (int groups : {2, 1})
    cases.push_back({std::string("dccrn core, groups=") + std::to_string(groups),
                     [groups](std::string* w) {
      ParamRegistry<D> reg(110 + groups);
      DccrnSpec s;
      s.enc_channels = {4, 4};
      s.in_channels = 2;
      s.out_channels = 2;
      s.freq_bins = 8;
      s.kf = 3;
      s.groups = groups;
      s.lstm_hidden = 4;
      Dccrn<D> net(reg, "net", s);
      auto xr = Var<D>::param(randn({1, 1, 3, 8}, 23));
      auto xi = Var<D>::param(randn({1, 1, 3, 8}, 24));
      CVar<D> x{xr, xi};
      return gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                               [&] { return project(net.forward(x, true), 25); }, 3, 1e-6, w);
    }});

  cases.push_back({"learnable spectrum compression, both directions", [](std::string* w) {
    ParamRegistry<D> reg(112);
    SpectrumCompression<D> comp(reg, "comp", 6);
    Rng r(26);
    for (int64_t i = 0; i < 6; ++i) comp.raw.val()[i] = r.uniform(-1.0, 1.0);
    auto xr = Var<D>::param(randn({1, 1, 2, 6}, 27));
    auto xi = Var<D>::param(randn({1, 1, 2, 6}, 28));
    CVar<D> x{xr, xi};
    double e = gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                 [&] { return project(comp.compress(x), 29); }, 4, 1e-6, w);
    return std::max(e, gradcheck_max_rel(with_input(reg, {{"xr", xr}, {"xi", xi}}),
                                         [&] { return project(comp.decompress(x), 30); }, 4, 1e-6,
                                         w));
  }});

  cases.push_back({"analysis and synthesis transforms", [](std::string* w) {
    AnalysisConfig cfg;
    auto wave = Var<D>::param(randn({1, 800}, 31, 0.3));
    double e = gradcheck_max_rel({{"wave", wave}},
                                 [&] { return project(stft_op(wave, cfg), 32); }, 8, 1e-6, w);
    auto zr = Var<D>::param(randn({1, 1, 2, 256}, 33));
    auto zi = Var<D>::param(randn({1, 1, 2, 256}, 34));
    CVar<D> z{zr, zi};
    return std::max(e, gradcheck_max_rel({{"zr", zr}, {"zi", zi}},
                                         [&] { return project(istft_op(z, cfg, 640), 35); }, 8,
                                         1e-6, w));
  }});

  cases.push_back({"bounded mask application", [](std::string* w) {
    auto fr = Var<D>::param(randn({1, 2, 3, 4}, 36));
    auto fi = Var<D>::param(randn({1, 2, 3, 4}, 37));
    auto mr = Var<D>::param(randn({1, 2, 3, 4}, 38));
    auto mi = Var<D>::param(randn({1, 2, 3, 4}, 39));
    CVar<D> f{fr, fi}, m{mr, mi};
    return gradcheck_max_rel({{"fr", fr}, {"fi", fi}, {"mr", mr}, {"mi", mi}},
                             [&] { return project(apply_crm(f, m), 40); }, 6, 1e-6, w);
  }});

  cases.push_back({"objective: scale-invariant snr", [](std::string* w) {
    auto est = Var<D>::param(randn({1, 600}, 41, 0.5));
    NdArray<D> ref = randn({1, 600}, 42, 0.5);
    return gradcheck_max_rel({{"est", est}}, [&] { return si_snr_op(est, ref); }, 8, 1e-6, w);
  }});

  cases.push_back({"objective: complex spectral distance", [](std::string* w) {
    auto xr = Var<D>::param(randn({1, 1, 2, 6}, 50));
    auto xi = Var<D>::param(randn({1, 1, 2, 6}, 51));
    CVar<D> est{xr, xi};
    CVar<D> ref{Var<D>::constant(randn({1, 1, 2, 6}, 52)),
                Var<D>::constant(randn({1, 1, 2, 6}, 53))};
    return gradcheck_max_rel({{"xr", xr}, {"xi", xi}},
                             [&] { return cmse_op(est, ref); }, 6, 1e-6, w);
  }});

  cases.push_back({"objective: spectral kl divergence", [](std::string* w) {
    auto xr = Var<D>::param(randn({1, 1, 2, 6}, 54));
    auto xi = Var<D>::param(randn({1, 1, 2, 6}, 55));
    CVar<D> est{xr, xi};
    NdArray<D> rr = randn({1, 1, 2, 6}, 56), ri = randn({1, 1, 2, 6}, 57);
    return gradcheck_max_rel({{"xr", xr}, {"xi", xi}},
                             [&] { return kl_div_op(est, rr, ri); }, 6, 1e-6, w);
  }});

  cases.push_back({"objective: joint loss", [](std::string* w) {
    AnalysisConfig cfg;
    auto est = Var<D>::param(randn({1, 800}, 43, 0.5));
    NdArray<D> ref = randn({1, 800}, 44, 0.5);
    return gradcheck_max_rel({{"est", est}},
                             [&] { return total_loss(est, ref, cfg).total; }, 8, 1e-6, w);
  }});

  cases.push_back({"end to end: tiny model through the joint objective", [](std::string* w) {
    ModelSpec spec = ModelSpec::tiny();
    SdccrnModel<D> model(spec);
    // the mask decoder's zero-started projection would zero most of the
    // gradient field; give it weight first
    Rng r(45);
    for (auto& [name, p] : model.reg.params)
      if (name.rfind("cfd.out.w", 0) == 0)
        for (int64_t i = 0; i < p.numel(); ++i) p.val()[i] = r.uniform(-0.1, 0.1);
    auto wave = Var<D>::param(randn({1, 1280}, 46, 0.3));
    NdArray<D> ref = randn({1, 1280}, 47, 0.3);
    return gradcheck_max_rel(
        with_input(model.reg, {{"wave", wave}}),
        [&] { return total_loss(model.forward(wave, true), ref, spec.analysis).total; }, 2, 1e-6,
        w);
  }});

  return cases;
}

}  // namespace gradcases
