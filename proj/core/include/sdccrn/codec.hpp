#pragma once

#include "sdccrn/layers.hpp"

namespace sdccrn {

// Complex feature encoder: lift the 1-channel compressed spectrum to a
// c-channel feature and halve frequency. 1x1 lift -> dilated dense block at
// full resolution -> stride-2 frequency downsample, LayerNorm+PReLU after
// every conv.
template <typename T>
struct ComplexFeatureEncoder {
  ComplexConv2d<T> in_conv;
  ComplexLayerNorm<T> in_ln;
  ComplexPReLU<T> in_act;
  DenseBlock<T> dense;
  ComplexConv2d<T> down_conv;
  ComplexLayerNorm<T> down_ln;
  ComplexPReLU<T> down_act;

  ComplexFeatureEncoder(ParamRegistry<T>& reg, const std::string& name, int64_t c, int depth)
      : in_conv(reg, name + ".in", 1, c, conv_geom(1, 1, 1, 1, 0)),
        in_ln(reg, name + ".in_ln", c),
        in_act(reg, name + ".in_act", c),
        dense(reg, name + ".dense", c, depth),
        down_conv(reg, name + ".down", c, c, conv_geom(3, 2, 2, 1, 1)),
        down_ln(reg, name + ".down_ln", c),
        down_act(reg, name + ".down_act", c) {}

  CVar<T> forward(const CVar<T>& x) const {
    CVar<T> h = in_act.forward(in_ln.forward(in_conv.forward(x)));
    h = dense.forward(h);
    return down_act.forward(down_ln.forward(down_conv.forward(h)));
  }
};

// Complex feature decoder: dense block -> sub-pixel frequency upsample (x2)
// -> 1x1 projection back to a 1-channel spectrum. The final conv carries no
// norm/activation and is zero-initialized, so a fresh model maps any input
// to an exactly-zero spectrum (and waveform) while its own gradient is alive.
template <typename T>
struct ComplexFeatureDecoder {
  DenseBlock<T> dense;
  ComplexPixelConv<T> up;
  ComplexLayerNorm<T> up_ln;
  ComplexPReLU<T> up_act;
  ComplexConv2d<T> out_conv;

  ComplexFeatureDecoder(ParamRegistry<T>& reg, const std::string& name, int64_t c, int depth)
      : dense(reg, name + ".dense", c, depth),
        up(reg, name + ".up", c, c, 2, conv_geom(3, 2, 1, 1, 1)),
        up_ln(reg, name + ".up_ln", c),
        up_act(reg, name + ".up_act", c),
        out_conv(reg, name + ".out", c, 1, conv_geom(1, 1, 1, 1, 0), /*zero_init=*/true) {}

  CVar<T> forward(const CVar<T>& x) const {
    CVar<T> h = dense.forward(x);
    h = up_act.forward(up_ln.forward(up.forward(h)));
    return out_conv.forward(h);
  }
};

}  // namespace sdccrn
