#pragma once

#include <string>

#include "sdccrn/model.hpp"

namespace sdccrn {

struct DataConfig {
  std::string train_manifest;
  std::string val_manifest;
  double chunk_seconds = 8.0;
  double snr_lo = -5.0;
  double snr_hi = 20.0;
};

// One JSON document drives a run; every field has an overridable default.
struct RunConfig {
  std::string model_kind = "sdccrn";  // "sdccrn" | "baseline"
  ModelSpec model;
  BaselineSpec baseline;
  DataConfig data;
  int batch_size = 4;
  int epochs = 60;
  std::string schedule = "warmup-fixed";  // "warmup-fixed" | "plateau-halving"
  double warmup_lr = 2.5e-5;
  double main_lr = 1e-3;
  int warmup_epochs = 10;
  double grad_clip = 5.0;
  uint64_t seed = 1;
  std::string checkpoint_dir = "checkpoints";

  const AnalysisConfig& analysis() const {
    return model_kind == "baseline" ? baseline.analysis : model.analysis;
  }

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin = "config");
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);  // pretty-printed document
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace sdccrn
