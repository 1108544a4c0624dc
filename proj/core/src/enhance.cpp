#include "sdccrn/enhance.hpp"

#include <cmath>
#include <stdexcept>

#include "sdccrn/losses.hpp"

namespace sdccrn {

std::vector<float> enhance_offline(ModelAdapter& model, const std::vector<float>& wave) {
  NoGradGuard guard;
  const int64_t L = static_cast<int64_t>(wave.size());
  NdArray<float> in(Shape{1, L});
  std::copy(wave.begin(), wave.end(), in.data());
  Var<float> out = model.forward(in, /*training=*/false);
  return {out.val().data(), out.val().data() + L};
}

namespace {

NdArray<double> to_double(const std::vector<float>& x) {
  NdArray<double> a(Shape{static_cast<int64_t>(x.size())});
  for (size_t i = 0; i < x.size(); ++i) a[static_cast<int64_t>(i)] = x[i];
  return a;
}

}  // namespace

double si_snr_db(const std::vector<float>& est, const std::vector<float>& ref) {
  if (est.size() != ref.size()) throw std::invalid_argument("si_snr: length mismatch");
  return si_snr(to_double(est), to_double(ref));
}

double si_snr_improvement_db(const std::vector<float>& est, const std::vector<float>& noisy,
                             const std::vector<float>& ref) {
  return si_snr_db(est, ref) - si_snr_db(noisy, ref);
}

double lsd_db(const std::vector<float>& est, const std::vector<float>& ref,
              const AnalysisConfig& cfg, double eps) {
  if (est.size() != ref.size()) throw std::invalid_argument("lsd: length mismatch");
  NdArray<double> er, ei, rr, ri;
  stft(to_double(est), cfg, er, ei);
  stft(to_double(ref), cfg, rr, ri);
  const int64_t Tt = er.shape()[0], F = er.shape()[1];
  double acc = 0.0;
  for (int64_t t = 0; t < Tt; ++t) {
    double frame = 0.0;
    for (int64_t f = 0; f < F; ++f) {
      const int64_t i = t * F + f;
      const double me = std::hypot(er[i], ei[i]);
      const double mr = std::hypot(rr[i], ri[i]);
      const double d = 20.0 * std::log10((me + eps) / (mr + eps));
      frame += d * d;
    }
    acc += std::sqrt(frame / static_cast<double>(F));
  }
  return acc / static_cast<double>(Tt);
}

}  // namespace sdccrn
