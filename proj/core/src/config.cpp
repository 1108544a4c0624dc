#include "sdccrn/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sdccrn {

using nlohmann::json;

namespace {

// Strict object reader: every key must be consumed, typos fail loudly.
struct Obj {
  const json& j;
  std::string where;
  std::set<std::string> seen;

  Obj(const json& j_, std::string where_) : j(j_), where(std::move(where_)) {
    if (!j.is_object()) throw std::runtime_error(where + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen.insert(key);
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const std::exception& e) {
      throw std::runtime_error(where + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen.insert(key);
    return j.contains(key) ? &j.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!seen.count(it.key()))
        throw std::runtime_error(where + ": unknown key \"" + it.key() + "\"");
  }
};

void read_analysis(const json& j, const std::string& where, AnalysisConfig& a) {
  Obj o(j, where);
  o.get("sample_rate", a.sample_rate);
  o.get("win_len", a.win_len);
  o.get("hop", a.hop);
  o.get("fft_size", a.fft_size);
  o.finish();
}

json analysis_to_json(const AnalysisConfig& a) {
  return json{{"sample_rate", a.sample_rate},
              {"win_len", a.win_len},
              {"hop", a.hop},
              {"fft_size", a.fft_size}};
}

}  // namespace

void RunConfig::validate() const {
  if (model_kind != "sdccrn" && model_kind != "baseline")
    throw std::runtime_error("config: model kind must be sdccrn or baseline");
  if (schedule != "warmup-fixed" && schedule != "plateau-halving")
    throw std::runtime_error("config: schedule must be warmup-fixed or plateau-halving");
  if (batch_size <= 0) throw std::runtime_error("config: batch_size must be positive");
  if (epochs < 0) throw std::runtime_error("config: epochs must be >= 0");
  if (warmup_epochs < 0) throw std::runtime_error("config: warmup_epochs must be >= 0");
  if (warmup_lr <= 0 || main_lr <= 0) throw std::runtime_error("config: learning rates must be positive");
  if (grad_clip <= 0) throw std::runtime_error("config: grad_clip must be positive");
  if (data.chunk_seconds <= 0) throw std::runtime_error("config: chunk_seconds must be positive");
  if (data.snr_hi < data.snr_lo) throw std::runtime_error("config: snr range is inverted");
  if (checkpoint_dir.empty()) throw std::runtime_error("config: checkpoint_dir must be set");
  analysis().validate();
}

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }

  RunConfig cfg;
  Obj top(j, origin);

  if (const json* m = top.sub("model")) {
    Obj o(*m, origin + ".model");
    o.get("kind", cfg.model_kind);
    o.get("cfe_channels", cfg.model.cfe_channels);
    o.get("dense_depth", cfg.model.dense_depth);
    o.get("subband_channels", cfg.model.subband_channels);
    o.get("subband_groups", cfg.model.subband_groups);
    o.get("lstm_hidden", cfg.model.lstm_hidden);
    o.get("lstm_layers", cfg.model.lstm_layers);
    o.get("declared_lstm_input", cfg.model.declared_lstm_input);
    o.get("baseline_channels", cfg.baseline.channels);
    o.get("baseline_lstm_hidden", cfg.baseline.lstm_hidden);
    o.get("baseline_lstm_layers", cfg.baseline.lstm_layers);
    o.get("baseline_declared_fc_input", cfg.baseline.declared_lstm_input);
    o.finish();
  }
  if (const json* a = top.sub("analysis")) {
    read_analysis(*a, origin + ".analysis", cfg.model.analysis);
    cfg.baseline.analysis = cfg.model.analysis;
  }
  if (const json* d = top.sub("data")) {
    Obj o(*d, origin + ".data");
    o.get("train_manifest", cfg.data.train_manifest);
    o.get("val_manifest", cfg.data.val_manifest);
    o.get("chunk_seconds", cfg.data.chunk_seconds);
    o.get("snr_lo", cfg.data.snr_lo);
    o.get("snr_hi", cfg.data.snr_hi);
    o.finish();
  }
  top.get("batch_size", cfg.batch_size);
  top.get("epochs", cfg.epochs);
  top.get("schedule", cfg.schedule);
  top.get("warmup_lr", cfg.warmup_lr);
  top.get("main_lr", cfg.main_lr);
  top.get("warmup_epochs", cfg.warmup_epochs);
  top.get("grad_clip", cfg.grad_clip);
  top.get("seed", cfg.seed);
  top.get("checkpoint_dir", cfg.checkpoint_dir);
  top.finish();

  cfg.model.init_seed = cfg.seed;
  cfg.baseline.init_seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text, path);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j{
      {"model",
       {{"kind", cfg.model_kind},
        {"cfe_channels", cfg.model.cfe_channels},
        {"dense_depth", cfg.model.dense_depth},
        {"subband_channels", cfg.model.subband_channels},
        {"subband_groups", cfg.model.subband_groups},
        {"lstm_hidden", cfg.model.lstm_hidden},
        {"lstm_layers", cfg.model.lstm_layers},
        {"declared_lstm_input", cfg.model.declared_lstm_input},
        {"baseline_channels", cfg.baseline.channels},
        {"baseline_lstm_hidden", cfg.baseline.lstm_hidden},
        {"baseline_lstm_layers", cfg.baseline.lstm_layers},
        {"baseline_declared_fc_input", cfg.baseline.declared_lstm_input}}},
      {"analysis", analysis_to_json(cfg.model.analysis)},
      {"data",
       {{"train_manifest", cfg.data.train_manifest},
        {"val_manifest", cfg.data.val_manifest},
        {"chunk_seconds", cfg.data.chunk_seconds},
        {"snr_lo", cfg.data.snr_lo},
        {"snr_hi", cfg.data.snr_hi}}},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"schedule", cfg.schedule},
      {"warmup_lr", cfg.warmup_lr},
      {"main_lr", cfg.main_lr},
      {"warmup_epochs", cfg.warmup_epochs},
      {"grad_clip", cfg.grad_clip},
      {"seed", cfg.seed},
      {"checkpoint_dir", cfg.checkpoint_dir}};
  return j.dump(2) + "\n";
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config: " + path);
  f << run_config_to_json(cfg);
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace sdccrn
