#pragma once

#include <string>
#include <vector>

namespace sdccrn {

struct ManifestEntry {
  std::string path;
  std::string kind;  // "speech" | "noise"
  double duration = 0.0;
  int sample_rate = 0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> of_kind(const std::string& kind) const;
};

// JSON-lines: one {"path","kind","duration","sample_rate"} object per line.
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

// Walks `dir` recursively, reads every .wav header, classifies entries whose
// path contains `noise_substring` (case-insensitive) as noise, rejects files
// whose rate differs from `sample_rate`.
Manifest scan_directory(const std::string& dir, int sample_rate,
                        const std::string& noise_substring = "noise");

}  // namespace sdccrn
