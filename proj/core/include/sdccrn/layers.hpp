#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdccrn/nn_ops.hpp"
#include "sdccrn/rng.hpp"

namespace sdccrn {

// Ordered named parameter store. Registration order is creation order, which
// makes checkpoints and optimizer state layout deterministic.
template <typename T>
struct ParamRegistry {
  explicit ParamRegistry(uint64_t seed = 0) : rng(seed) {}

  Rng rng;
  std::vector<std::pair<std::string, Var<T>>> params;
  std::vector<std::pair<std::string, std::shared_ptr<BatchNormState<T>>>> bn_states;

  Var<T> uniform_param(const std::string& name, const Shape& shape, int64_t fan_in) {
    NdArray<T> a(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(1, fan_in)));
    for (auto& v : a.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
    return track(name, Var<T>::param(std::move(a)));
  }

  Var<T> const_param(const std::string& name, const Shape& shape, T value) {
    return track(name, Var<T>::param(NdArray<T>(shape, value)));
  }

  Var<T> track(const std::string& name, Var<T> v) {
    for (auto& [n, p] : params)
      if (n == name) throw std::logic_error("duplicate parameter name: " + name);
    params.emplace_back(name, v);
    return v;
  }

  std::shared_ptr<BatchNormState<T>> make_bn_state(const std::string& name, int64_t channels) {
    auto st = std::make_shared<BatchNormState<T>>();
    st->running_mean = NdArray<T>(Shape{channels}, T(0));
    st->running_var = NdArray<T>(Shape{channels}, T(1));
    bn_states.emplace_back(name, st);
    return st;
  }

  Var<T> find(const std::string& name) const {
    for (auto& [n, p] : params)
      if (n == name) return p;
    throw std::out_of_range("no such parameter: " + name);
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (auto& [_, p] : params) n += p.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [_, p] : params) p.node()->zero_grad();
  }
};

inline ConvGeom conv_geom(int kf, int kt, int sf, int st, int pf, int dt = 1) {
  ConvGeom g;
  g.kt = kt;
  g.kf = kf;
  g.st = st;
  g.sf = sf;
  g.dt = dt;
  g.df = 1;
  g.pt0 = dt * (kt - 1);  // causal: past frames only
  g.pt1 = 0;
  g.pf0 = pf;
  g.pf1 = pf;
  return g;
}

// Complex 2-d convolution layer; fan-in counts real summands (2 * in * taps).
template <typename T>
struct ComplexConv2d {
  Var<T> wr, wi, br, bi;
  ConvGeom geom;

  ComplexConv2d(ParamRegistry<T>& reg, const std::string& name, int64_t in_c, int64_t out_c,
                const ConvGeom& g, bool zero_init = false)
      : geom(g) {
    const Shape ws{out_c, in_c, g.kt, g.kf};
    const int64_t fan_in = 2 * in_c * g.kt * g.kf;
    if (zero_init) {
      wr = reg.const_param(name + ".wr", ws, T(0));
      wi = reg.const_param(name + ".wi", ws, T(0));
    } else {
      wr = reg.uniform_param(name + ".wr", ws, fan_in);
      wi = reg.uniform_param(name + ".wi", ws, fan_in);
    }
    br = reg.const_param(name + ".br", Shape{out_c}, T(0));
    bi = reg.const_param(name + ".bi", Shape{out_c}, T(0));
  }

  CVar<T> forward(const CVar<T>& x) const { return complex_conv2d(x, wr, wi, br, bi, geom); }

  // Frequency-grouped application: split F into `groups` contiguous bands,
  // run the same kernel on each band independently (zero padding at band
  // edges), concatenate along frequency. No cross-band information flow.
  CVar<T> forward_grouped(const CVar<T>& x, int groups) const {
    if (groups <= 1) return forward(x);
    const int64_t F = x.dim(3);
    if (F % groups != 0)
      throw std::invalid_argument("grouped conv: F not divisible by group count");
    const int64_t Fb = F / groups;
    std::vector<CVar<T>> outs;
    for (int g = 0; g < groups; ++g)
      outs.push_back(forward(cslice(x, 3, g * Fb, Fb)));
    return cconcat(outs, 3);
  }
};

// Complex transposed convolution; weights conv-style [in, out, kt, kf], the
// target output size is passed per call (decoder mirrors encoder sizes).
template <typename T>
struct ComplexConvTranspose2d {
  Var<T> wr, wi, br, bi;
  ConvGeom geom;

  ComplexConvTranspose2d(ParamRegistry<T>& reg, const std::string& name, int64_t in_c,
                         int64_t out_c, const ConvGeom& g)
      : geom(g) {
    const Shape ws{in_c, out_c, g.kt, g.kf};
    const int64_t fan_in = 2 * in_c * g.kt * g.kf;
    wr = reg.uniform_param(name + ".wr", ws, fan_in);
    wi = reg.uniform_param(name + ".wi", ws, fan_in);
    br = reg.const_param(name + ".br", Shape{out_c}, T(0));
    bi = reg.const_param(name + ".bi", Shape{out_c}, T(0));
  }

  CVar<T> forward(const CVar<T>& x, int64_t out_t, int64_t out_f) const {
    return complex_tconv2d(x, wr, wi, br, bi, geom, out_t, out_f);
  }

  CVar<T> forward_grouped(const CVar<T>& x, int groups, int64_t out_t, int64_t out_f) const {
    if (groups <= 1) return forward(x, out_t, out_f);
    const int64_t F = x.dim(3);
    if (F % groups != 0 || out_f % groups != 0)
      throw std::invalid_argument("grouped tconv: F not divisible by group count");
    const int64_t Fb = F / groups, Ob = out_f / groups;
    std::vector<CVar<T>> outs;
    for (int g = 0; g < groups; ++g)
      outs.push_back(forward(cslice(x, 3, g * Fb, Fb), out_t, Ob));
    return cconcat(outs, 3);
  }
};

// BatchNorm applied to real and imaginary parts independently.
template <typename T>
struct ComplexBatchNorm {
  Var<T> gr, betar, gi, betai;
  std::shared_ptr<BatchNormState<T>> st_re, st_im;

  ComplexBatchNorm(ParamRegistry<T>& reg, const std::string& name, int64_t c) {
    gr = reg.const_param(name + ".gamma_re", Shape{c}, T(1));
    betar = reg.const_param(name + ".beta_re", Shape{c}, T(0));
    gi = reg.const_param(name + ".gamma_im", Shape{c}, T(1));
    betai = reg.const_param(name + ".beta_im", Shape{c}, T(0));
    st_re = reg.make_bn_state(name + ".re", c);
    st_im = reg.make_bn_state(name + ".im", c);
  }

  CVar<T> forward(const CVar<T>& x, bool training) const {
    return {batch_norm(x.re, gr, betar, st_re.get(), training),
            batch_norm(x.im, gi, betai, st_im.get(), training)};
  }
};

// LayerNorm over (C, F) per frame, real and imaginary parts independent.
template <typename T>
struct ComplexLayerNorm {
  Var<T> gr, betar, gi, betai;

  ComplexLayerNorm(ParamRegistry<T>& reg, const std::string& name, int64_t c) {
    gr = reg.const_param(name + ".gamma_re", Shape{c}, T(1));
    betar = reg.const_param(name + ".beta_re", Shape{c}, T(0));
    gi = reg.const_param(name + ".gamma_im", Shape{c}, T(1));
    betai = reg.const_param(name + ".beta_im", Shape{c}, T(0));
  }

  CVar<T> forward(const CVar<T>& x) const {
    return {layer_norm(x.re, gr, betar), layer_norm(x.im, gi, betai)};
  }
};

template <typename T>
struct ComplexPReLU {
  Var<T> ar, ai;

  ComplexPReLU(ParamRegistry<T>& reg, const std::string& name, int64_t c) {
    ar = reg.const_param(name + ".slope_re", Shape{c}, T(0.25));
    ai = reg.const_param(name + ".slope_im", Shape{c}, T(0.25));
  }

  CVar<T> forward(const CVar<T>& x) const { return {prelu(x.re, ar), prelu(x.im, ai)}; }
};

template <typename T>
struct LstmLayer {
  Var<T> wih, whh, bih, bhh;
  int64_t input, hidden;

  LstmLayer(ParamRegistry<T>& reg, const std::string& name, int64_t in, int64_t h)
      : input(in), hidden(h) {
    wih = reg.uniform_param(name + ".wih", Shape{4 * h, in}, in);
    whh = reg.uniform_param(name + ".whh", Shape{4 * h, h}, h);
    bih = reg.const_param(name + ".bih", Shape{4 * h}, T(0));
    bhh = reg.const_param(name + ".bhh", Shape{4 * h}, T(0));
  }

  Var<T> forward(const Var<T>& x) const {
    const int64_t N = x.shape()[0];
    auto h0 = Var<T>::constant(NdArray<T>(Shape{N, hidden}, T(0)));
    auto c0 = Var<T>::constant(NdArray<T>(Shape{N, hidden}, T(0)));
    return lstm_layer(x, wih, whh, bih, bhh, h0, c0);
  }
};

template <typename T>
struct LinearLayer {
  Var<T> w, b;

  LinearLayer(ParamRegistry<T>& reg, const std::string& name, int64_t in, int64_t out) {
    w = reg.uniform_param(name + ".w", Shape{out, in}, in);
    b = reg.const_param(name + ".b", Shape{out}, T(0));
  }

  Var<T> forward(const Var<T>& x) const { return linear(x, w, b); }
};

// Recurrent bottleneck: flatten (C, F) at the encoder output, stack re/im
// into one real feature (width 2*C*F), run LSTM layers + FC, unstack.
template <typename T>
struct Bottleneck {
  std::vector<LstmLayer<T>> lstm;
  LinearLayer<T> fc;
  int64_t channels, freqs, in_width;

  Bottleneck(ParamRegistry<T>& reg, const std::string& name, int64_t c, int64_t f, int64_t hidden,
             int num_layers)
      : fc(reg, name + ".fc", hidden, 2 * c * f), channels(c), freqs(f), in_width(2 * c * f) {
    int64_t in = in_width;
    for (int l = 0; l < num_layers; ++l) {
      lstm.emplace_back(reg, name + ".lstm" + std::to_string(l), in, hidden);
      in = hidden;
    }
  }

  CVar<T> forward(const CVar<T>& x) const {
    const int64_t N = x.dim(0), C = x.dim(1), Tt = x.dim(2), F = x.dim(3);
    if (C != channels || F != freqs)
      throw std::invalid_argument("bottleneck: unexpected (C,F) at encoder output");
    auto re = reshape(permute0213(x.re), Shape{N, Tt, C * F});
    auto im = reshape(permute0213(x.im), Shape{N, Tt, C * F});
    Var<T> h = concat<T>({re, im}, 2);
    for (const auto& l : lstm) h = l.forward(h);
    h = fc.forward(h);
    auto yr = reshape(slice(h, 2, 0, C * F), Shape{N, Tt, C, F});
    auto yi = reshape(slice(h, 2, C * F, C * F), Shape{N, Tt, C, F});
    return {permute0213(yr), permute0213(yi)};
  }
};

// Dilated dense block: `depth` conv layers, layer i consuming the channel
// concat of the input and all previous outputs, time dilation 2^i, each
// followed by LayerNorm + PReLU. Channel width (growth) is constant.
template <typename T>
struct DenseBlock {
  std::vector<ComplexConv2d<T>> convs;
  std::vector<ComplexLayerNorm<T>> norms;
  std::vector<ComplexPReLU<T>> acts;
  int64_t channels;
  int depth;

  DenseBlock(ParamRegistry<T>& reg, const std::string& name, int64_t c, int depth_, int kf = 3,
             int kt = 2)
      : channels(c), depth(depth_) {
    for (int i = 0; i < depth_; ++i) {
      const int dt = 1 << i;
      convs.emplace_back(reg, name + ".conv" + std::to_string(i), c * (i + 1), c,
                         conv_geom(kf, kt, 1, 1, (kf - 1) / 2, dt));
      norms.emplace_back(reg, name + ".ln" + std::to_string(i), c);
      acts.emplace_back(reg, name + ".act" + std::to_string(i), c);
    }
  }

  CVar<T> forward(const CVar<T>& x) const {
    std::vector<CVar<T>> feats{x};
    CVar<T> y = x;
    for (int i = 0; i < depth; ++i) {
      CVar<T> in = feats.size() == 1 ? feats[0] : cconcat(feats, 1);
      y = acts[i].forward(norms[i].forward(convs[i].forward(in)));
      feats.push_back(y);
    }
    return y;
  }
};

// Frequency sub-pixel upsampler: conv to c*r channels, then interleave the
// channel factor into frequency (r consecutive channels -> r adjacent bins).
template <typename T>
struct ComplexPixelConv {
  ComplexConv2d<T> conv;
  int r;

  ComplexPixelConv(ParamRegistry<T>& reg, const std::string& name, int64_t in_c, int64_t out_c,
                   int upscale, const ConvGeom& g)
      : conv(reg, name + ".conv", in_c, out_c * upscale, g), r(upscale) {}

  CVar<T> forward(const CVar<T>& x) const {
    CVar<T> y = conv.forward(x);
    return {pixel_shuffle_freq(y.re, r), pixel_shuffle_freq(y.im, r)};
  }
};

}  // namespace sdccrn
