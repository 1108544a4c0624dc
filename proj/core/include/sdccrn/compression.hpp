#pragma once

#include "sdccrn/layers.hpp"
#include "sdccrn/nn_ops.hpp"

namespace sdccrn {

// Learnable per-frequency spectrum compression: Y -> |Y|^alpha * e^{j phase},
// alpha(f) = sigmoid(raw(f)) in (0,1). Raw logits init 0 => alpha = 0.5.
// 0^alpha is defined as 0 (the magnitude floor only enters via the log).
template <typename T>
struct SpectrumCompression {
  Var<T> raw;
  T eps;

  SpectrumCompression(ParamRegistry<T>& reg, const std::string& name, int64_t bins,
                      T eps_ = T(1e-8))
      : raw(reg.const_param(name + ".raw", Shape{bins}, T(0))), eps(eps_) {}

  Var<T> alpha() const { return sigmoid_v(raw); }

  // z * |z|^(a-1); exact zero stays exact zero because the scale multiplies z.
  CVar<T> apply_exponent(const CVar<T>& z, const Var<T>& exponent_minus_1) const {
    Var<T> mag = clamp_min(cmag(z), eps);
    Var<T> scale = exp_v(mul_bcast_freq(log_v(mag), exponent_minus_1));
    return {mul(z.re, scale), mul(z.im, scale)};
  }

  CVar<T> compress(const CVar<T>& z) const {
    return apply_exponent(z, add_scalar(alpha(), T(-1)));
  }

  // inverse map: exponent 1/alpha, i.e. scale |x|^(1/alpha - 1).
  CVar<T> decompress(const CVar<T>& z) const {
    Var<T> a = alpha();
    Var<T> ones = Var<T>::constant(NdArray<T>(a.shape(), T(1)));
    return apply_exponent(z, sub(div(ones, a), ones));
  }
};

}  // namespace sdccrn
