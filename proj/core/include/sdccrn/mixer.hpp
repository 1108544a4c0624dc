#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdccrn/array.hpp"
#include "sdccrn/manifest.hpp"

namespace sdccrn {

struct MixResult {
  std::vector<float> noisy;
  std::vector<float> clean;
};

// noisy = speech + g * noise with g chosen so 10*log10(P_speech/P_scaled_noise)
// equals snr_db exactly (powers are means over the chunk, accumulated in
// double). If peak(|noisy|) > peak_guard both signals are rescaled together,
// which leaves the SNR unchanged. Lengths must match.
MixResult synthesize_mixture(const std::vector<float>& speech, const std::vector<float>& noise,
                             double snr_db, double peak_guard = 0.99);

// Non-overlapping chunks of exactly chunk_len samples. Shorter inputs yield
// one zero-padded chunk; trailing remainders are dropped.
std::vector<std::vector<float>> chunk_audio(const std::vector<float>& x, int64_t chunk_len);

struct Batch {
  NdArray<float> noisy;  // [N, L]
  NdArray<float> clean;  // [N, L]
};

// Deterministic batch source: batches are pure functions of (epoch, step), so
// resumption and multi-worker partitioning need no iterator state.
struct DataProvider {
  virtual ~DataProvider() = default;
  virtual int64_t steps_per_epoch() const = 0;
  virtual Batch train_batch(int64_t epoch, int64_t step) const = 0;
  virtual const std::vector<Batch>& val_batches() const = 0;
};

// On-the-fly mixing from manifest files. Each epoch visits every speech chunk
// once in a seeded permutation; the paired noise file, noise offset, and SNR
// are counter-seeded draws, so any (epoch, step) is reproducible in isolation.
// Validation mixtures use a fixed epoch tag and never change.
struct MixtureDataset : DataProvider {
  MixtureDataset(const Manifest& train, const Manifest& val, int sample_rate, double chunk_seconds,
                 int batch_size, double snr_lo, double snr_hi, uint64_t seed);

  int64_t steps_per_epoch() const override;
  Batch train_batch(int64_t epoch, int64_t step) const override;
  const std::vector<Batch>& val_batches() const override;

  struct ChunkRef {
    int file = 0;     // index into speech file list
    int64_t index = 0;  // chunk index within the file
  };

 private:
  Batch make_batch(const std::vector<std::string>& speech_files,
                   const std::vector<ChunkRef>& chunks,
                   const std::vector<std::string>& noise_files, int64_t epoch_tag,
                   int64_t tag_base) const;

  std::vector<std::string> train_speech_, noise_files_;
  std::vector<ChunkRef> train_chunks_;
  int64_t chunk_len_;
  int batch_;
  double snr_lo_, snr_hi_;
  uint64_t seed_;
  std::vector<Batch> val_;
};

// In-memory source over prebuilt (noisy, clean) pairs; used by tests and toy
// training runs. Training order is a per-epoch seeded permutation.
struct VectorProvider : DataProvider {
  VectorProvider(std::vector<MixResult> train, std::vector<MixResult> val, int batch_size,
                 uint64_t seed);

  int64_t steps_per_epoch() const override;
  Batch train_batch(int64_t epoch, int64_t step) const override;
  const std::vector<Batch>& val_batches() const override;

 private:
  std::vector<MixResult> train_;
  int batch_;
  uint64_t seed_;
  std::vector<Batch> val_;
};

Batch stack_pairs(const std::vector<const MixResult*>& pairs);

}  // namespace sdccrn
