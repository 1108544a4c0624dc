#include "sdccrn/wav.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sdccrn {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& os, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ostream& os, uint16_t v) {
  const uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

WavData load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open wav file: " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  auto bad = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("malformed wav file " + path + ": " + why);
  };
  if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw bad("missing RIFF/WAVE header");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const uint8_t* data_ptr = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const uint32_t sz = rd_u32(raw.data() + pos + 4);
    pos += 8;
    if (pos + sz > raw.size()) throw bad("chunk overruns file");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw bad("fmt chunk too small");
      format = rd_u16(raw.data() + pos);
      channels = rd_u16(raw.data() + pos + 2);
      rate = rd_u32(raw.data() + pos + 4);
      bits = rd_u16(raw.data() + pos + 14);
      if (format == kFormatExtensible) {
        if (sz < 40) throw bad("extensible fmt chunk too small");
        format = rd_u16(raw.data() + pos + 24);  // first 2 bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = raw.data() + pos;
      data_len = sz;
    }
    pos += sz + (sz & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw bad("no fmt chunk");
  if (!data_ptr) throw bad("no data chunk");
  if (channels == 0) throw bad("zero channels");
  if (format == kFormatPcm) {
    if (bits != 16) throw bad("PCM must be 16-bit");
  } else if (format == kFormatFloat) {
    if (bits != 32) throw bad("float must be 32-bit");
  } else {
    throw bad("unsupported format code " + std::to_string(format));
  }

  const size_t bytes_per_sample = bits / 8;
  const size_t stride = bytes_per_sample * channels;
  const size_t frames = data_len / stride;

  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    const uint8_t* p = data_ptr + i * stride;  // first channel
    if (format == kFormatPcm) {
      const int16_t v = static_cast<int16_t>(rd_u16(p));
      out.samples[i] = static_cast<float>(v) / 32768.0f;
    } else {
      float v;
      std::memcpy(&v, p, 4);
      out.samples[i] = v;
    }
  }
  return out;
}

std::vector<float> load_wav_checked(const std::string& path, int expected_rate) {
  WavData w = load_wav(path);
  if (w.sample_rate != expected_rate)
    throw std::runtime_error(path + ": expected " + std::to_string(expected_rate) + " Hz, got " +
                             std::to_string(w.sample_rate));
  return std::move(w.samples);
}

void save_wav(const std::string& path, const std::vector<float>& samples, int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write wav file: " + path);

  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 4);
  f.write("RIFF", 4);
  wr_u32(f, 4 + (8 + 16) + (8 + 4) + (8 + data_bytes));
  f.write("WAVE", 4);

  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, kFormatFloat);
  wr_u16(f, 1);  // mono
  wr_u32(f, static_cast<uint32_t>(sample_rate));
  wr_u32(f, static_cast<uint32_t>(sample_rate) * 4);
  wr_u16(f, 4);
  wr_u16(f, 32);

  f.write("fact", 4);
  wr_u32(f, 4);
  wr_u32(f, static_cast<uint32_t>(samples.size()));

  f.write("data", 4);
  wr_u32(f, data_bytes);
  f.write(reinterpret_cast<const char*>(samples.data()), data_bytes);
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace sdccrn
