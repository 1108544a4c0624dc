#include "sdccrn/streaming.hpp"

#include <chrono>
#include <cstring>

namespace sdccrn {

namespace {

int64_t time_span(const ConvGeom& g) { return static_cast<int64_t>(g.kt - 1) * g.dt + 1; }

// Rolling window of the last `span` frames of a [1, C, 1, F] feature.
struct ConvState {
  NdArray<float> re, im;  // [1, C, span, F]
  int64_t C, span, F;

  ConvState(int64_t c, int64_t span_, int64_t f)
      : re(Shape{1, c, span_, f}), im(Shape{1, c, span_, f}), C(c), span(span_), F(f) {}

  void push(const CVar<float>& frame) {
    if (frame.dim(1) != C || frame.dim(2) != 1 || frame.dim(3) != F)
      throw std::logic_error("stream: frame does not match conv state");
    auto roll = [&](NdArray<float>& buf, const NdArray<float>& fr) {
      for (int64_t c = 0; c < C; ++c) {
        float* base = buf.data() + c * span * F;
        std::memmove(base, base + F, static_cast<size_t>((span - 1) * F) * sizeof(float));
        std::memcpy(base + (span - 1) * F, fr.data() + c * F,
                    static_cast<size_t>(F) * sizeof(float));
      }
    };
    roll(re, frame.re.val());
    roll(im, frame.im.val());
  }

  CVar<float> window() const { return cvar_constant(re, im); }
};

// Causal conv on a full window: the window already supplies the history, so
// the time padding is dropped and exactly one frame comes out.
CVar<float> conv_window(const ComplexConv2d<float>& L, const CVar<float>& win, int groups) {
  ConvGeom g0 = L.geom;
  g0.pt0 = 0;
  g0.pt1 = 0;
  auto apply = [&](const CVar<float>& xb) {
    return complex_conv2d(xb, L.wr, L.wi, L.br, L.bi, g0);
  };
  if (groups <= 1) return apply(win);
  const int64_t F = win.dim(3);
  if (F % groups != 0) throw std::logic_error("stream: F not divisible by groups");
  const int64_t Fb = F / groups;
  std::vector<CVar<float>> outs;
  for (int g = 0; g < groups; ++g) outs.push_back(apply(cslice(win, 3, g * Fb, Fb)));
  return cconcat(outs, 3);
}

CVar<float> step_conv(const ComplexConv2d<float>& L, ConvState& st, const CVar<float>& frame,
                      int groups) {
  st.push(frame);
  return conv_window(L, st.window(), groups);
}

// Transposed conv over [prev, current]: with the layer's (0, kt-1) time pads
// the two produced frames are t-1 and t; keep t.
CVar<float> step_tconv(const ComplexConvTranspose2d<float>& L, ConvState& st,
                       const CVar<float>& frame, int groups, int64_t out_f) {
  st.push(frame);
  CVar<float> y = L.forward_grouped(st.window(), groups, /*out_t=*/2, out_f);
  return cslice(y, 2, 1, 1);
}

struct DenseState {
  std::vector<ConvState> layers;
};

DenseState make_dense_state(const DenseBlock<float>& d, int64_t f) {
  DenseState st;
  for (int i = 0; i < d.depth; ++i)
    st.layers.emplace_back(d.channels * (i + 1), time_span(d.convs[i].geom), f);
  return st;
}

CVar<float> step_dense(const DenseBlock<float>& d, DenseState& st, const CVar<float>& x) {
  std::vector<CVar<float>> feats{x};
  CVar<float> y = x;
  for (int i = 0; i < d.depth; ++i) {
    CVar<float> in = feats.size() == 1 ? feats[0] : cconcat(feats, 1);
    y = step_conv(d.convs[i], st.layers[i], in, 1);
    y = d.acts[i].forward(d.norms[i].forward(y));
    feats.push_back(y);
  }
  return y;
}

struct LstmState {
  std::vector<std::vector<float>> h, c;
};

void lstm_cell_step(const LstmLayer<float>& l, std::vector<float>& h, std::vector<float>& c,
                    const std::vector<float>& x, std::vector<float>& out) {
  const int64_t D = l.input, H = l.hidden;
  convk::CMapM<float> Wih(l.wih.val().data(), 4 * H, D);
  convk::CMapM<float> Whh(l.whh.val().data(), 4 * H, H);
  Eigen::Map<const Eigen::VectorXf> xv(x.data(), D);
  Eigen::Map<const Eigen::VectorXf> hv(h.data(), H);
  Eigen::VectorXf g = Wih * xv;
  g.noalias() += Whh * hv;
  const float* bi = l.bih.val().data();
  const float* bh = l.bhh.val().data();
  out.resize(static_cast<size_t>(H));
  for (int64_t k = 0; k < H; ++k) {
    const float gi = g[k] + bi[k] + bh[k];
    const float gf = g[H + k] + bi[H + k] + bh[H + k];
    const float gg = g[2 * H + k] + bi[2 * H + k] + bh[2 * H + k];
    const float go = g[3 * H + k] + bi[3 * H + k] + bh[3 * H + k];
    const float iv = 1.0f / (1.0f + std::exp(-gi));
    const float fv = 1.0f / (1.0f + std::exp(-gf));
    const float gv = std::tanh(gg);
    const float ov = 1.0f / (1.0f + std::exp(-go));
    const float cv = fv * c[static_cast<size_t>(k)] + iv * gv;
    c[static_cast<size_t>(k)] = cv;
    out[static_cast<size_t>(k)] = ov * std::tanh(cv);
  }
  h = out;
}

CVar<float> step_bottleneck(const Bottleneck<float>& b, LstmState& st, const CVar<float>& x) {
  const int64_t C = b.channels, F = b.freqs, W = b.in_width;
  std::vector<float> v(static_cast<size_t>(W));
  std::memcpy(v.data(), x.re.val().data(), static_cast<size_t>(C * F) * sizeof(float));
  std::memcpy(v.data() + C * F, x.im.val().data(), static_cast<size_t>(C * F) * sizeof(float));

  std::vector<float> out;
  for (size_t l = 0; l < b.lstm.size(); ++l) {
    lstm_cell_step(b.lstm[l], st.h[l], st.c[l], v, out);
    v = out;
  }

  const auto& wshape = b.fc.w.shape();  // [out=W, in=hidden]
  convk::CMapM<float> Wf(b.fc.w.val().data(), wshape[0], wshape[1]);
  Eigen::Map<const Eigen::VectorXf> hv(v.data(), wshape[1]);
  Eigen::VectorXf y = Wf * hv;
  const float* bias = b.fc.b.val().data();

  NdArray<float> yr(Shape{1, C, 1, F}), yi(Shape{1, C, 1, F});
  for (int64_t k = 0; k < C * F; ++k) {
    yr[k] = y[k] + bias[k];
    yi[k] = y[C * F + k] + bias[C * F + k];
  }
  return cvar_constant(std::move(yr), std::move(yi));
}

struct DccrnState {
  std::vector<ConvState> enc, dec;
  LstmState lstm;
};

DccrnState make_dccrn_state(const Dccrn<float>& d) {
  DccrnState st;
  const size_t L = d.enc.size();
  for (size_t i = 0; i < L; ++i)
    st.enc.emplace_back(d.enc[i].wr.shape()[1], time_span(d.enc[i].geom), d.f_trace[i]);
  for (size_t i = 0; i < L; ++i)
    st.dec.emplace_back(d.dec[i].wr.shape()[0], time_span(d.dec[i].geom),
                        d.f_trace[L - i]);  // decoder input resolution
  for (const auto& l : d.bottleneck->lstm) {
    st.lstm.h.emplace_back(static_cast<size_t>(l.hidden), 0.0f);
    st.lstm.c.emplace_back(static_cast<size_t>(l.hidden), 0.0f);
  }
  return st;
}

CVar<float> step_dccrn(const Dccrn<float>& d, DccrnState& st, const CVar<float>& x) {
  const size_t L = d.enc.size();
  std::vector<CVar<float>> skips;
  CVar<float> h = x;
  for (size_t i = 0; i < L; ++i) {
    h = step_conv(d.enc[i], st.enc[i], h, d.spec.groups);
    h = d.enc_act[i].forward(d.enc_bn[i].forward(h, false));
    skips.push_back(h);
  }
  h = step_bottleneck(*d.bottleneck, st.lstm, h);
  for (size_t i = 0; i < L; ++i) {
    const size_t e = L - 1 - i;
    CVar<float> skip = skips[e];
    if (d.spec.pathway)
      skip = d.path_bn[e].forward(conv_window(d.path[e], skip, 1), false);
    h = cconcat<float>({h, skip}, 1);
    h = step_tconv(d.dec[i], st.dec[i], h, d.spec.groups, d.f_trace[e]);
    if (i + 1 < L) h = d.dec_act[i].forward(d.dec_bn[i].forward(h, false));
  }
  return h;
}

}  // namespace

struct StreamingEnhancer::Impl {
  const SdccrnModel<float>& model;
  AnalysisConfig cfg;
  int64_t F;

  std::vector<float> abuf;  // sliding analysis window, win samples
  std::vector<float> ola;   // synthesis accumulator, win samples
  int64_t blocks = 0;

  ConvState cfe_in, cfe_down;
  DenseState cfe_dense;
  DccrnState sub, full;
  DenseState cfd_dense;
  ConvState cfd_up, cfd_out;

  explicit Impl(const SdccrnModel<float>& m)
      : model(m),
        cfg(m.spec.analysis),
        F(cfg.bins()),
        abuf(static_cast<size_t>(cfg.win_len), 0.0f),
        ola(static_cast<size_t>(cfg.win_len), 0.0f),
        cfe_in(1, time_span(m.cfe.in_conv.geom), F),
        cfe_down(m.cfe.down_conv.wr.shape()[1], time_span(m.cfe.down_conv.geom), F),
        cfe_dense(make_dense_state(m.cfe.dense, F)),
        sub(make_dccrn_state(m.subband)),
        full(make_dccrn_state(m.fullband)),
        cfd_dense(make_dense_state(m.cfd.dense, F / 2)),
        cfd_up(m.cfd.up.conv.wr.shape()[1], time_span(m.cfd.up.conv.geom), F / 2),
        cfd_out(m.cfd.out_conv.wr.shape()[1], time_span(m.cfd.out_conv.geom), F) {}

  CVar<float> enhance_frame(const CVar<float>& spec) {
    CVar<float> compressed = model.compression.compress(spec);

    CVar<float> h = step_conv(model.cfe.in_conv, cfe_in, compressed, 1);
    h = model.cfe.in_act.forward(model.cfe.in_ln.forward(h));
    h = step_dense(model.cfe.dense, cfe_dense, h);
    h = step_conv(model.cfe.down_conv, cfe_down, h, 1);
    CVar<float> feat = model.cfe.down_act.forward(model.cfe.down_ln.forward(h));

    CVar<float> sub_out = step_dccrn(model.subband, sub, feat);
    CVar<float> cat = cconcat<float>({sub_out, feat}, 1);
    CVar<float> mask = step_dccrn(model.fullband, full, cat);
    CVar<float> masked = apply_crm(feat, mask);

    CVar<float> o = step_dense(model.cfd.dense, cfd_dense, masked);
    o = step_conv(model.cfd.up.conv, cfd_up, o, 1);
    o = CVar<float>{pixel_shuffle_freq(o.re, model.cfd.up.r),
                    pixel_shuffle_freq(o.im, model.cfd.up.r)};
    o = model.cfd.up_act.forward(model.cfd.up_ln.forward(o));
    o = step_conv(model.cfd.out_conv, cfd_out, o, 1);

    return model.compression.decompress(o);
  }

  std::vector<float> push_block(const float* x) {
    const int hop = cfg.hop, win = cfg.win_len;
    std::memmove(abuf.data(), abuf.data() + hop, static_cast<size_t>(win - hop) * sizeof(float));
    std::memcpy(abuf.data() + (win - hop), x, static_cast<size_t>(hop) * sizeof(float));
    ++blocks;
    if (blocks < win / hop) return {};

    NoGradGuard guard;
    NdArray<float> sre(Shape{1, 1, 1, F}), sim(Shape{1, 1, 1, F});
    detail::stft_frames(abuf.data(), win, cfg, sre.data(), sim.data());
    CVar<float> out = enhance_frame(cvar_constant(std::move(sre), std::move(sim)));

    std::vector<float> frame(static_cast<size_t>(win));
    detail::istft_frames(out.re.val().data(), out.im.val().data(), 1, cfg, frame.data(), win);
    for (int i = 0; i < win; ++i) ola[static_cast<size_t>(i)] += frame[static_cast<size_t>(i)];

    std::vector<float> emit(ola.begin(), ola.begin() + hop);
    std::memmove(ola.data(), ola.data() + hop, static_cast<size_t>(win - hop) * sizeof(float));
    std::fill(ola.end() - hop, ola.end(), 0.0f);
    return emit;
  }

  std::vector<float> flush() {
    return std::vector<float>(ola.begin(), ola.begin() + (cfg.win_len - cfg.hop));
  }
};

StreamingEnhancer::StreamingEnhancer(const SdccrnModel<float>& model)
    : impl_(std::make_unique<Impl>(model)) {
  model.spec.analysis.validate();
  if (model.spec.analysis.win_len % model.spec.analysis.hop != 0)
    throw std::invalid_argument("stream: win must be a multiple of hop");
}

StreamingEnhancer::~StreamingEnhancer() = default;

int StreamingEnhancer::hop() const { return impl_->cfg.hop; }
int StreamingEnhancer::win() const { return impl_->cfg.win_len; }
int64_t StreamingEnhancer::latency_samples() const { return impl_->cfg.win_len + impl_->cfg.hop; }

std::vector<float> StreamingEnhancer::push_block(const float* x) { return impl_->push_block(x); }
std::vector<float> StreamingEnhancer::flush() { return impl_->flush(); }

StreamResult enhance_streaming(const SdccrnModel<float>& model, const std::vector<float>& wave) {
  const AnalysisConfig& cfg = model.spec.analysis;
  const int64_t len = static_cast<int64_t>(wave.size());
  if (len < cfg.win_len) throw std::invalid_argument("input too short");

  StreamingEnhancer se(model);
  StreamResult res;
  res.wave.assign(wave.size(), 0.0f);
  const int64_t B = len / cfg.hop;
  int64_t wpos = 0;

  const auto t0 = std::chrono::steady_clock::now();
  for (int64_t b = 0; b < B; ++b) {
    const std::vector<float> out = se.push_block(wave.data() + b * cfg.hop);
    for (float v : out)
      if (wpos < len) res.wave[static_cast<size_t>(wpos++)] = v;
  }
  for (float v : se.flush())
    if (wpos < len) res.wave[static_cast<size_t>(wpos++)] = v;
  const auto t1 = std::chrono::steady_clock::now();

  const double proc = std::chrono::duration<double>(t1 - t0).count();
  res.xrt = proc / (static_cast<double>(len) / cfg.sample_rate);
  return res;
}

}  // namespace sdccrn
