#pragma once

#include "sdccrn/layers.hpp"

namespace sdccrn {

// Conv-recurrent encoder/decoder with skip pathways. Channel lists are given
// in packed (stacked re/im) notation as in the configuration files; complex
// widths are half of those. `groups` > 1 splits the frequency axis into that
// many independent bands at every conv/tconv (shared kernels per layer).
struct DccrnSpec {
  std::vector<int> enc_channels;  // packed, e.g. {32,64,64,64,128,128}
  int in_channels = 2;            // packed input width
  int out_channels = 2;           // packed output width
  int freq_bins = 256;            // F at the model boundary
  int kf = 5, kt = 2;
  int sf = 2, st = 1;
  int groups = 1;
  int lstm_hidden = 256;
  int lstm_layers = 1;
  int lstm_input = 0;  // asserted if nonzero
  bool pathway = true;

  void validate() const {
    if (enc_channels.empty()) throw std::invalid_argument("dccrn: empty channel list");
    auto even = [](int v) { return v > 0 && v % 2 == 0; };
    if (!even(in_channels) || !even(out_channels))
      throw std::invalid_argument("dccrn: packed channel counts must be even");
    for (int c : enc_channels)
      if (!even(c)) throw std::invalid_argument("dccrn: packed channel counts must be even");
    if (groups < 1) throw std::invalid_argument("dccrn: groups must be >= 1");
  }
};

template <typename T>
struct Dccrn {
  DccrnSpec spec;
  std::vector<ComplexConv2d<T>> enc;
  std::vector<ComplexBatchNorm<T>> enc_bn;
  std::vector<ComplexPReLU<T>> enc_act;
  std::vector<ComplexConv2d<T>> path;
  std::vector<ComplexBatchNorm<T>> path_bn;
  std::vector<ComplexConvTranspose2d<T>> dec;
  std::vector<ComplexBatchNorm<T>> dec_bn;
  std::vector<ComplexPReLU<T>> dec_act;
  std::unique_ptr<Bottleneck<T>> bottleneck;
  std::vector<int64_t> f_trace;  // F at the input of each encoder layer + bottleneck

  Dccrn(ParamRegistry<T>& reg, const std::string& name, const DccrnSpec& s) : spec(s) {
    spec.validate();
    const size_t L = spec.enc_channels.size();
    const ConvGeom g = conv_geom(spec.kf, spec.kt, spec.sf, spec.st, (spec.kf - 1) / 2);
    // Decoder tconv = adjoint of an ANTI-causal conv (time pads (0, kt-1)),
    // which makes the transposed map itself causal: out[t] <- in[t-1], in[t].
    ConvGeom gd = g;
    gd.pt0 = 0;
    gd.pt1 = g.kt - 1;

    int64_t in_c = spec.in_channels / 2;
    int64_t f = spec.freq_bins;
    for (size_t i = 0; i < L; ++i) {
      const int64_t out_c = spec.enc_channels[i] / 2;
      f_trace.push_back(f);
      enc.emplace_back(reg, name + ".enc" + std::to_string(i), in_c, out_c, g);
      enc_bn.emplace_back(reg, name + ".enc_bn" + std::to_string(i), out_c);
      enc_act.emplace_back(reg, name + ".enc_act" + std::to_string(i), out_c);
      if (spec.pathway) {
        path.emplace_back(reg, name + ".path" + std::to_string(i), out_c, out_c,
                          conv_geom(1, 1, 1, 1, 0));
        path_bn.emplace_back(reg, name + ".path_bn" + std::to_string(i), out_c);
      }
      if (spec.groups > 1) {
        if (f % spec.groups != 0)
          throw std::invalid_argument("dccrn: F not divisible by groups at layer " +
                                      std::to_string(i));
        f = spec.groups * g.out_f(f / spec.groups);
      } else {
        f = g.out_f(f);
      }
      in_c = out_c;
    }
    f_trace.push_back(f);

    const int64_t c_last = spec.enc_channels.back() / 2;
    const int64_t width = 2 * c_last * f;
    if (spec.lstm_input != 0 && width != spec.lstm_input)
      throw std::logic_error("dccrn: bottleneck width " + std::to_string(width) +
                             " != declared LSTM input " + std::to_string(spec.lstm_input));
    bottleneck = std::make_unique<Bottleneck<T>>(reg, name + ".bott", c_last, f,
                                                 spec.lstm_hidden, spec.lstm_layers);

    for (size_t i = 0; i < L; ++i) {
      const size_t e = L - 1 - i;  // mirrored encoder layer
      const int64_t skip_c = spec.enc_channels[e] / 2;
      const int64_t prev_c = i == 0 ? c_last : dec_out_channels(i - 1);
      const int64_t out_c = dec_out_channels(i);
      dec.emplace_back(reg, name + ".dec" + std::to_string(i), prev_c + skip_c, out_c, gd);
      if (i + 1 < L) {
        dec_bn.emplace_back(reg, name + ".dec_bn" + std::to_string(i), out_c);
        dec_act.emplace_back(reg, name + ".dec_act" + std::to_string(i), out_c);
      }
    }
  }

  int64_t dec_out_channels(size_t i) const {
    const size_t L = spec.enc_channels.size();
    if (i + 1 == L) return spec.out_channels / 2;
    // mirror: decoder layer i produces the input width of encoder layer L-1-i
    const size_t e = L - 1 - i;
    return e == 0 ? spec.in_channels / 2 : spec.enc_channels[e - 1] / 2;
  }

  int64_t bottleneck_width() const { return bottleneck->in_width; }

  CVar<T> forward(const CVar<T>& x, bool training) const {
    if (x.dim(3) != spec.freq_bins)
      throw std::invalid_argument("dccrn: input frequency size mismatch");
    if (x.dim(1) != spec.in_channels / 2)
      throw std::invalid_argument("dccrn: input channel mismatch");
    const size_t L = enc.size();
    const int64_t Tt = x.dim(2);

    std::vector<CVar<T>> skips;
    CVar<T> h = x;
    for (size_t i = 0; i < L; ++i) {
      h = enc[i].forward_grouped(h, spec.groups);
      h = enc_act[i].forward(enc_bn[i].forward(h, training));
      skips.push_back(h);
    }
    h = bottleneck->forward(h);
    for (size_t i = 0; i < L; ++i) {
      const size_t e = L - 1 - i;
      CVar<T> skip = skips[e];
      if (spec.pathway) skip = path_bn[e].forward(path[e].forward(skip), training);
      h = cconcat<T>({h, skip}, 1);
      h = dec[i].forward_grouped(h, spec.groups, Tt, f_trace[e]);
      if (i + 1 < L) h = dec_act[i].forward(dec_bn[i].forward(h, training));
    }
    return h;
  }
};

// Magnitude-bounded complex ratio mask: multiplier tanh(|m|) e^{j phase(m)},
// applied elementwise to the feature. Safe at m == 0 (multiplier -> 0).
template <typename T>
CVar<T> apply_crm(const CVar<T>& feature, const CVar<T>& mask, T eps = T(1e-8)) {
  Var<T> mag = cmag(mask);
  Var<T> scale = div(tanh_v(mag), clamp_min(mag, eps));
  CVar<T> bounded{mul(mask.re, scale), mul(mask.im, scale)};
  return cmul(feature, bounded);
}

}  // namespace sdccrn
