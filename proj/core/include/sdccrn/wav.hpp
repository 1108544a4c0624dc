#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdccrn {

struct WavData {
  int sample_rate = 0;
  std::vector<float> samples;  // first channel, [-1, 1]
};

// RIFF/WAVE reader: PCM16 or IEEE float32 (plus the WAVE_FORMAT_EXTENSIBLE
// wrappers of either); multi-channel files yield the first channel.
WavData load_wav(const std::string& path);

// Loads and rejects any rate other than `expected_rate` ("expected N Hz").
std::vector<float> load_wav_checked(const std::string& path, int expected_rate);

// Writes mono IEEE float32.
void save_wav(const std::string& path, const std::vector<float>& samples, int sample_rate);

}  // namespace sdccrn
