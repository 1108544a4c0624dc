#pragma once

#include "sdccrn/codec.hpp"
#include "sdccrn/compression.hpp"
#include "sdccrn/dccrn.hpp"
#include "sdccrn/stft.hpp"

namespace sdccrn {

// Architecture description for the cascaded sub-band/full-band model.
// Channel numbers are packed (stacked re/im) counts.
struct ModelSpec {
  AnalysisConfig analysis;
  int cfe_channels = 32;
  int dense_depth = 5;
  std::vector<int> subband_channels = {32, 64, 64, 64, 128, 128};
  int subband_groups = 2;
  int lstm_hidden = 256;
  int lstm_layers = 1;
  int declared_lstm_input = 256;  // asserted at construction; 0 disables
  uint64_t init_seed = 1;

  static ModelSpec tiny() {
    ModelSpec s;
    s.analysis.win_len = 512;
    s.analysis.hop = 256;
    s.analysis.fft_size = 512;
    s.cfe_channels = 8;
    s.dense_depth = 1;
    s.subband_channels = {8, 8, 16, 16};
    s.lstm_hidden = 32;
    s.declared_lstm_input = 0;
    return s;
  }
};

template <typename T>
struct SdccrnModel {
  ModelSpec spec;
  ParamRegistry<T> reg;
  SpectrumCompression<T> compression;
  ComplexFeatureEncoder<T> cfe;
  Dccrn<T> subband;
  Dccrn<T> fullband;
  ComplexFeatureDecoder<T> cfd;

  explicit SdccrnModel(const ModelSpec& s = ModelSpec{})
      : spec(s),
        reg(s.init_seed),
        compression(reg, "compression", s.analysis.bins()),
        cfe(reg, "cfe", s.cfe_channels / 2, s.dense_depth),
        subband(reg, "subband", subband_spec(s)),
        fullband(reg, "fullband", fullband_spec(s)),
        cfd(reg, "cfd", s.cfe_channels / 2, s.dense_depth) {}

  static DccrnSpec subband_spec(const ModelSpec& s) {
    DccrnSpec d;
    d.enc_channels = s.subband_channels;
    d.in_channels = s.cfe_channels;
    d.out_channels = s.cfe_channels;
    d.freq_bins = s.analysis.bins() / 2;  // CFE halves frequency
    d.groups = s.subband_groups;
    d.lstm_hidden = s.lstm_hidden;
    d.lstm_layers = s.lstm_layers;
    d.lstm_input = s.declared_lstm_input;
    d.pathway = true;
    return d;
  }

  static DccrnSpec fullband_spec(const ModelSpec& s) {
    DccrnSpec d = subband_spec(s);
    d.in_channels = 2 * s.cfe_channels;  // concat(sub-band out, CFE feature)
    d.groups = 1;
    return d;
  }

  int64_t parameter_count() const { return reg.parameter_count(); }

  // Compressed-domain core: spectrum [N,1,T,F] -> enhanced spectrum.
  CVar<T> enhance_spectrum(const CVar<T>& spec_in, bool training) const {
    CVar<T> compressed = compression.compress(spec_in);
    CVar<T> feat = cfe.forward(compressed);
    CVar<T> sub = subband.forward(feat, training);
    CVar<T> cat = cconcat<T>({sub, feat}, 1);
    CVar<T> mask = fullband.forward(cat, training);
    CVar<T> masked = apply_crm(feat, mask);
    CVar<T> out = cfd.forward(masked);
    return compression.decompress(out);
  }

  // wave [N, L] -> enhanced wave [N, L].
  Var<T> forward(const Var<T>& wave, bool training) const {
    const int64_t L = wave.shape()[1];
    CVar<T> spec_in = stft_op(wave, spec.analysis);
    CVar<T> spec_out = enhance_spectrum(spec_in, training);
    return istft_op(spec_out, spec.analysis, L);
  }
};

// Plain DCCRN reference model: tanh-bounded CRM estimated from and applied
// to the raw (uncompressed) spectrum.
struct BaselineSpec {
  AnalysisConfig analysis;
  std::vector<int> channels = {16, 32, 64, 128, 256, 256};
  int lstm_hidden = 256;
  int lstm_layers = 2;
  int declared_lstm_input = 1024;
  uint64_t init_seed = 1;
};

template <typename T>
struct BaselineModel {
  BaselineSpec spec;
  ParamRegistry<T> reg;
  Dccrn<T> dccrn;

  explicit BaselineModel(const BaselineSpec& s = BaselineSpec{})
      : spec(s), reg(s.init_seed), dccrn(reg, "dccrn", baseline_spec(s)) {}

  static DccrnSpec baseline_spec(const BaselineSpec& s) {
    DccrnSpec d;
    d.enc_channels = s.channels;
    d.in_channels = 2;
    d.out_channels = 2;
    d.freq_bins = s.analysis.bins();
    d.groups = 1;
    d.lstm_hidden = s.lstm_hidden;
    d.lstm_layers = s.lstm_layers;
    d.lstm_input = s.declared_lstm_input;
    d.pathway = false;
    return d;
  }

  int64_t parameter_count() const { return reg.parameter_count(); }

  Var<T> forward(const Var<T>& wave, bool training) const {
    const int64_t L = wave.shape()[1];
    CVar<T> spec_in = stft_op(wave, spec.analysis);
    CVar<T> mask = dccrn.forward(spec_in, training);
    CVar<T> masked = apply_crm(spec_in, mask);
    return istft_op(masked, spec.analysis, L);
  }

  // FC dims exposed for the architecture-consistency checks.
  std::pair<int64_t, int64_t> fc_dims() const {
    const auto& w = dccrn.bottleneck->fc.w.shape();
    return {w[1], w[0]};
  }
};

}  // namespace sdccrn
