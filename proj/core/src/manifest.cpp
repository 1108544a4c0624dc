#include "sdccrn/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sdccrn/wav.hpp"

namespace sdccrn {

using nlohmann::json;

std::vector<ManifestEntry> Manifest::of_kind(const std::string& kind) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.kind == kind) out.push_back(e);
  return out;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  Manifest m;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ManifestEntry ent;
    ent.path = j.at("path").get<std::string>();
    ent.kind = j.at("kind").get<std::string>();
    ent.duration = j.at("duration").get<double>();
    ent.sample_rate = j.at("sample_rate").get<int>();
    if (ent.kind != "speech" && ent.kind != "noise")
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad kind " + ent.kind);
    m.entries.push_back(std::move(ent));
  }
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  for (const auto& e : m.entries) {
    json j{{"path", e.path}, {"kind", e.kind}, {"duration", e.duration},
           {"sample_rate", e.sample_rate}};
    f << j.dump() << "\n";
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

Manifest scan_directory(const std::string& dir, int sample_rate,
                        const std::string& noise_substring) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);

  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string needle = lower(noise_substring);

  std::vector<fs::path> files;
  for (const auto& de : fs::recursive_directory_iterator(dir))
    if (de.is_regular_file() && lower(de.path().extension().string()) == ".wav")
      files.push_back(de.path());
  std::sort(files.begin(), files.end());

  Manifest m;
  for (const auto& p : files) {
    WavData w = load_wav(p.string());
    if (w.sample_rate != sample_rate)
      throw std::runtime_error(p.string() + ": expected " + std::to_string(sample_rate) +
                               " Hz, got " + std::to_string(w.sample_rate));
    ManifestEntry e;
    e.path = p.string();
    e.kind = lower(p.string()).find(needle) != std::string::npos ? "noise" : "speech";
    e.duration = static_cast<double>(w.samples.size()) / sample_rate;
    e.sample_rate = w.sample_rate;
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace sdccrn
