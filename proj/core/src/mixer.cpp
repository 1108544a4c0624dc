#include "sdccrn/mixer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sdccrn/rng.hpp"
#include "sdccrn/wav.hpp"

namespace sdccrn {

namespace {

double mean_power(const std::vector<float>& x) {
  double p = 0.0;
  for (float v : x) p += static_cast<double>(v) * v;
  return p / static_cast<double>(x.size());
}

std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int64_t epoch) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(hash_combine(seed, hash_combine(0x7065726dULL, static_cast<uint64_t>(epoch))));
  for (int64_t i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(i + 1))]);
  return idx;
}

// Independent draw stream per (seed, epoch, sample): resumable without state.
Rng sample_rng(uint64_t seed, int64_t epoch, int64_t sample) {
  return Rng(hash_combine(hash_combine(seed, static_cast<uint64_t>(epoch)),
                          hash_combine(0x6d6978ULL, static_cast<uint64_t>(sample))));
}

constexpr int64_t kValEpochTag = -0x56414c;  // validation draws never collide with training epochs

}  // namespace

MixResult synthesize_mixture(const std::vector<float>& speech, const std::vector<float>& noise,
                             double snr_db, double peak_guard) {
  if (speech.size() != noise.size())
    throw std::invalid_argument("synthesize_mixture: length mismatch");
  if (speech.empty()) throw std::invalid_argument("synthesize_mixture: empty input");
  const double ps = mean_power(speech);
  const double pn = mean_power(noise);
  if (ps == 0.0) throw std::invalid_argument("synthesize_mixture: all-zero speech");
  if (pn == 0.0) throw std::invalid_argument("synthesize_mixture: all-zero noise");

  const double g = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));

  MixResult out;
  out.noisy.resize(speech.size());
  out.clean = speech;
  double peak = 0.0;
  for (size_t i = 0; i < speech.size(); ++i) {
    const double v = static_cast<double>(speech[i]) + g * static_cast<double>(noise[i]);
    out.noisy[i] = static_cast<float>(v);
    peak = std::max(peak, std::abs(v));
  }
  if (peak > peak_guard) {
    const double s = peak_guard / peak;
    for (size_t i = 0; i < speech.size(); ++i) {
      out.noisy[i] = static_cast<float>(static_cast<double>(out.noisy[i]) * s);
      out.clean[i] = static_cast<float>(static_cast<double>(out.clean[i]) * s);
    }
  }
  return out;
}

std::vector<std::vector<float>> chunk_audio(const std::vector<float>& x, int64_t chunk_len) {
  if (chunk_len <= 0) throw std::invalid_argument("chunk_audio: chunk_len must be positive");
  std::vector<std::vector<float>> out;
  if (static_cast<int64_t>(x.size()) < chunk_len) {
    std::vector<float> c(static_cast<size_t>(chunk_len), 0.0f);
    std::copy(x.begin(), x.end(), c.begin());
    out.push_back(std::move(c));
    return out;
  }
  const int64_t n = static_cast<int64_t>(x.size()) / chunk_len;
  for (int64_t i = 0; i < n; ++i)
    out.emplace_back(x.begin() + i * chunk_len, x.begin() + (i + 1) * chunk_len);
  return out;
}

Batch stack_pairs(const std::vector<const MixResult*>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("stack_pairs: empty batch");
  const int64_t N = static_cast<int64_t>(pairs.size());
  const int64_t L = static_cast<int64_t>(pairs[0]->noisy.size());
  Batch b{NdArray<float>(Shape{N, L}), NdArray<float>(Shape{N, L})};
  for (int64_t n = 0; n < N; ++n) {
    if (static_cast<int64_t>(pairs[n]->noisy.size()) != L ||
        static_cast<int64_t>(pairs[n]->clean.size()) != L)
      throw std::invalid_argument("stack_pairs: length mismatch");
    std::copy(pairs[n]->noisy.begin(), pairs[n]->noisy.end(), b.noisy.data() + n * L);
    std::copy(pairs[n]->clean.begin(), pairs[n]->clean.end(), b.clean.data() + n * L);
  }
  return b;
}

MixtureDataset::MixtureDataset(const Manifest& train, const Manifest& val, int sample_rate,
                               double chunk_seconds, int batch_size, double snr_lo, double snr_hi,
                               uint64_t seed)
    : chunk_len_(static_cast<int64_t>(std::llround(chunk_seconds * sample_rate))),
      batch_(batch_size),
      snr_lo_(snr_lo),
      snr_hi_(snr_hi),
      seed_(seed) {
  if (batch_size <= 0) throw std::invalid_argument("dataset: batch_size must be positive");
  if (chunk_len_ <= 0) throw std::invalid_argument("dataset: chunk length must be positive");

  auto collect = [&](const Manifest& m, std::vector<std::string>& files,
                     std::vector<ChunkRef>& chunks) {
    for (const auto& e : m.of_kind("speech")) {
      const int64_t len = static_cast<int64_t>(std::llround(e.duration * sample_rate));
      const int64_t n = len < chunk_len_ ? 1 : len / chunk_len_;
      const int file = static_cast<int>(files.size());
      files.push_back(e.path);
      for (int64_t c = 0; c < n; ++c) chunks.push_back({file, c});
    }
  };

  collect(train, train_speech_, train_chunks_);
  for (const auto& e : train.of_kind("noise")) noise_files_.push_back(e.path);
  if (train_chunks_.empty() || noise_files_.empty())
    throw std::runtime_error("dataset: manifest has no speech or no noise entries");
  if (static_cast<int64_t>(train_chunks_.size()) < batch_)
    throw std::runtime_error("dataset: fewer speech chunks than one batch");

  std::vector<std::string> val_speech;
  std::vector<ChunkRef> val_chunks;
  collect(val, val_speech, val_chunks);
  std::vector<std::string> val_noise;
  for (const auto& e : val.of_kind("noise")) val_noise.push_back(e.path);
  if (val_noise.empty()) val_noise = noise_files_;
  for (int64_t i = 0; i < static_cast<int64_t>(val_chunks.size()); i += batch_) {
    const int64_t count = std::min<int64_t>(batch_, static_cast<int64_t>(val_chunks.size()) - i);
    const std::vector<ChunkRef> slice(val_chunks.begin() + i, val_chunks.begin() + i + count);
    val_.push_back(make_batch(val_speech, slice, val_noise, kValEpochTag, i));
  }
}

int64_t MixtureDataset::steps_per_epoch() const {
  return static_cast<int64_t>(train_chunks_.size()) / batch_;
}

Batch MixtureDataset::train_batch(int64_t epoch, int64_t step) const {
  if (step < 0 || step >= steps_per_epoch()) throw std::out_of_range("train_batch: step");
  const auto perm = epoch_permutation(static_cast<int64_t>(train_chunks_.size()), seed_, epoch);
  std::vector<ChunkRef> picked;
  for (int64_t n = 0; n < batch_; ++n)
    picked.push_back(train_chunks_[static_cast<size_t>(perm[static_cast<size_t>(step * batch_ + n)])]);
  return make_batch(train_speech_, picked, noise_files_, epoch, step * batch_);
}

const std::vector<Batch>& MixtureDataset::val_batches() const { return val_; }

Batch MixtureDataset::make_batch(const std::vector<std::string>& speech_files,
                                 const std::vector<ChunkRef>& chunks,
                                 const std::vector<std::string>& noise_files, int64_t epoch_tag,
                                 int64_t tag_base) const {
  std::vector<MixResult> mixes;
  for (int64_t n = 0; n < static_cast<int64_t>(chunks.size()); ++n) {
    const ChunkRef& ref = chunks[static_cast<size_t>(n)];
    const std::vector<float> sp = load_wav(speech_files[static_cast<size_t>(ref.file)]).samples;

    std::vector<float> chunk(static_cast<size_t>(chunk_len_), 0.0f);
    const int64_t base = ref.index * chunk_len_;
    const int64_t avail = std::min<int64_t>(chunk_len_, static_cast<int64_t>(sp.size()) - base);
    for (int64_t i = 0; i < avail; ++i) chunk[static_cast<size_t>(i)] = sp[static_cast<size_t>(base + i)];

    Rng rng = sample_rng(seed_, epoch_tag, tag_base + n);
    const auto& npath = noise_files[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(noise_files.size())))];
    const std::vector<float> nz = load_wav(npath).samples;
    std::vector<float> noise(static_cast<size_t>(chunk_len_));
    if (static_cast<int64_t>(nz.size()) >= chunk_len_) {
      const int64_t off = rng.uniform_int(static_cast<int64_t>(nz.size()) - chunk_len_ + 1);
      std::copy(nz.begin() + off, nz.begin() + off + chunk_len_, noise.begin());
    } else {
      const int64_t phase = rng.uniform_int(static_cast<int64_t>(nz.size()));
      for (int64_t i = 0; i < chunk_len_; ++i)
        noise[static_cast<size_t>(i)] = nz[static_cast<size_t>((phase + i) % static_cast<int64_t>(nz.size()))];
    }
    const double snr = rng.uniform(snr_lo_, snr_hi_);
    mixes.push_back(synthesize_mixture(chunk, noise, snr));
  }
  std::vector<const MixResult*> ptrs;
  for (const auto& m : mixes) ptrs.push_back(&m);
  return stack_pairs(ptrs);
}

VectorProvider::VectorProvider(std::vector<MixResult> train, std::vector<MixResult> val,
                               int batch_size, uint64_t seed)
    : train_(std::move(train)), batch_(batch_size), seed_(seed) {
  if (batch_size <= 0) throw std::invalid_argument("provider: batch_size must be positive");
  if (static_cast<int64_t>(train_.size()) < batch_)
    throw std::invalid_argument("provider: fewer training pairs than one batch");
  for (size_t i = 0; i < val.size(); i += static_cast<size_t>(batch_)) {
    std::vector<const MixResult*> ptrs;
    for (size_t n = i; n < std::min(val.size(), i + static_cast<size_t>(batch_)); ++n)
      ptrs.push_back(&val[n]);
    val_.push_back(stack_pairs(ptrs));
  }
}

int64_t VectorProvider::steps_per_epoch() const {
  return static_cast<int64_t>(train_.size()) / batch_;
}

Batch VectorProvider::train_batch(int64_t epoch, int64_t step) const {
  if (step < 0 || step >= steps_per_epoch()) throw std::out_of_range("train_batch: step");
  const auto perm = epoch_permutation(static_cast<int64_t>(train_.size()), seed_, epoch);
  std::vector<const MixResult*> ptrs;
  for (int64_t n = 0; n < batch_; ++n)
    ptrs.push_back(&train_[static_cast<size_t>(perm[static_cast<size_t>(step * batch_ + n)])]);
  return stack_pairs(ptrs);
}

const std::vector<Batch>& VectorProvider::val_batches() const { return val_; }

}  // namespace sdccrn
