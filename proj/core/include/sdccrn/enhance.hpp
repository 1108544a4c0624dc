#pragma once

#include <vector>

#include "sdccrn/stft.hpp"
#include "sdccrn/trainer.hpp"

namespace sdccrn {

// Whole-utterance enhancement (eval mode, no autodiff). Output length equals
// input length; the input must span at least one analysis window.
std::vector<float> enhance_offline(ModelAdapter& model, const std::vector<float>& wave);

// Metrics are evaluated in double regardless of the model precision.
double si_snr_db(const std::vector<float>& est, const std::vector<float>& ref);
double si_snr_improvement_db(const std::vector<float>& est, const std::vector<float>& noisy,
                             const std::vector<float>& ref);

// Log-spectral distance in dB: per frame the rms over bins of
// 20*log10((|est|+eps)/(|ref|+eps)), averaged over frames.
double lsd_db(const std::vector<float>& est, const std::vector<float>& ref,
              const AnalysisConfig& cfg, double eps = 1e-8);

}  // namespace sdccrn
