#pragma once

#include <memory>
#include <vector>

#include "sdccrn/model.hpp"

namespace sdccrn {

// Frame-synchronous streaming enhancer for the cascaded model. Input arrives
// in hop-sized blocks; every conv/tconv keeps a ring of exactly the frames
// its causal time window spans, the recurrent core carries (h, c). Output
// block k is emitted right after input block k+2 lands, so the worst-case
// per-sample algorithmic delay is win + hop samples (20 ms at the default
// 480/160 configuration). Matches offline enhancement up to float
// reassociation noise.
class StreamingEnhancer {
 public:
  explicit StreamingEnhancer(const SdccrnModel<float>& model);
  ~StreamingEnhancer();

  int hop() const;
  int win() const;
  int64_t latency_samples() const;  // win + hop

  // x must hold exactly hop() samples; returns hop samples once warmed up
  // (empty for the first two blocks).
  std::vector<float> push_block(const float* x);

  // Emits the final win - hop samples.
  std::vector<float> flush();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct StreamResult {
  std::vector<float> wave;
  double xrt = 0;  // processing time / audio time
};

// Runs a whole waveform through the streaming path; output length equals
// input length.
StreamResult enhance_streaming(const SdccrnModel<float>& model, const std::vector<float>& wave);

}  // namespace sdccrn
