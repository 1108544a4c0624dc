#include "sdccrn/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sdccrn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "sdccrn-checkpoint-v1";

struct TensorRef {
  std::string name;
  Shape shape;
  int64_t offset = 0;
  std::string file;
};

void append_tensor(json& table, std::ofstream& bin, int64_t& offset, const std::string& file,
                   const std::string& name, const NdArray<float>& a) {
  table.push_back(json{{"name", name},
                       {"shape", a.shape()},
                       {"dtype", "f32"},
                       {"offset", offset},
                       {"file", file}});
  bin.write(reinterpret_cast<const char*>(a.data()), a.numel() * 4);
  offset += a.numel() * 4;
}

std::map<std::string, TensorRef> read_index(const json& j) {
  std::map<std::string, TensorRef> out;
  for (const auto& t : j.at("tensors")) {
    TensorRef r;
    r.name = t.at("name").get<std::string>();
    r.shape = t.at("shape").get<Shape>();
    r.offset = t.at("offset").get<int64_t>();
    r.file = t.at("file").get<std::string>();
    if (t.at("dtype").get<std::string>() != "f32")
      throw std::runtime_error("checkpoint: unsupported dtype for " + r.name);
    if (!out.emplace(r.name, r).second)
      throw std::runtime_error("checkpoint: duplicate tensor " + r.name);
  }
  return out;
}

void read_tensor(const std::string& dir, const TensorRef& r, NdArray<float>& dst) {
  if (!(dst.shape() == r.shape))
    throw std::runtime_error("checkpoint: shape mismatch for " + r.name + " (stored " +
                             shape_str(r.shape) + ", model " + shape_str(dst.shape()) + ")");
  std::ifstream f(dir + "/" + r.file, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + dir + "/" + r.file);
  f.seekg(r.offset);
  f.read(reinterpret_cast<char*>(dst.data()), dst.numel() * 4);
  if (!f) throw std::runtime_error("checkpoint: short read for " + r.name);
}

}  // namespace

void save_checkpoint(const std::string& dir, const RunConfig& cfg,
                     const ParamRegistry<float>& reg, const Adam* opt, const TrainerState* ts) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json tensors = json::array();
  {
    std::ofstream bin(dir + "/params.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("checkpoint: cannot write " + dir + "/params.bin");
    int64_t off = 0;
    for (const auto& [name, p] : reg.params) append_tensor(tensors, bin, off, "params.bin", name, p.val());
    for (const auto& [name, st] : reg.bn_states) {
      append_tensor(tensors, bin, off, "params.bin", name + ".running_mean", st->running_mean);
      append_tensor(tensors, bin, off, "params.bin", name + ".running_var", st->running_var);
    }
    if (!bin) throw std::runtime_error("checkpoint: short write to params.bin");
  }

  json index{{"format", kFormat}, {"tensors", std::move(tensors)}};

  if (opt) {
    if (opt->m.size() != reg.params.size())
      throw std::logic_error("checkpoint: optimizer slots do not match registry");
    json otab = json::array();
    std::ofstream bin(dir + "/opt.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("checkpoint: cannot write " + dir + "/opt.bin");
    int64_t off = 0;
    for (size_t i = 0; i < reg.params.size(); ++i) {
      append_tensor(otab, bin, off, "opt.bin", reg.params[i].first + ".adam_m", opt->m[i]);
      append_tensor(otab, bin, off, "opt.bin", reg.params[i].first + ".adam_v", opt->v[i]);
    }
    index["optimizer"] = json{{"t", opt->t},
                              {"beta1", opt->beta1},
                              {"beta2", opt->beta2},
                              {"eps", opt->eps},
                              {"tensors", std::move(otab)}};
  }

  if (ts)
    // JSON has no infinity; an untouched best_val round-trips as a huge finite sentinel.
    index["trainer"] = json{{"next_epoch", ts->next_epoch},
                            {"global_step", ts->global_step},
                            {"lr", ts->lr},
                            {"best_val", std::isfinite(ts->best_val) ? ts->best_val : 1e300}};

  {
    std::ofstream f(dir + "/index.json");
    if (!f) throw std::runtime_error("checkpoint: cannot write " + dir + "/index.json");
    f << index.dump(2) << "\n";
    if (!f) throw std::runtime_error("checkpoint: short write to index.json");
  }
  save_run_config(dir + "/config.json", cfg);
}

RunConfig read_checkpoint_config(const std::string& dir) {
  return load_run_config(dir + "/config.json");
}

void load_checkpoint_into(const std::string& dir, ParamRegistry<float>& reg, Adam* opt,
                          TrainerState* ts) {
  std::ifstream f(dir + "/index.json");
  if (!f) throw std::runtime_error("checkpoint: cannot open " + dir + "/index.json");
  json index = json::parse(f);
  if (index.at("format").get<std::string>() != kFormat)
    throw std::runtime_error("checkpoint: unknown format in " + dir);

  const auto table = read_index(index);
  size_t used = 0;
  for (auto& [name, p] : reg.params) {
    auto it = table.find(name);
    if (it == table.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    read_tensor(dir, it->second, p.val());
    ++used;
  }
  for (auto& [name, st] : reg.bn_states) {
    for (const char* suffix : {".running_mean", ".running_var"}) {
      auto it = table.find(name + suffix);
      if (it == table.end()) throw std::runtime_error("checkpoint: missing tensor " + name + suffix);
      read_tensor(dir, it->second, suffix[9] == 'm' ? st->running_mean : st->running_var);
      ++used;
    }
  }
  if (used != table.size())
    throw std::runtime_error("checkpoint: " + std::to_string(table.size() - used) +
                             " stored tensor(s) not present in the model");

  if (opt) {
    if (!index.contains("optimizer"))
      throw std::runtime_error("checkpoint: no optimizer state in " + dir);
    const json& oj = index.at("optimizer");
    opt->t = oj.at("t").get<int64_t>();
    opt->beta1 = oj.at("beta1").get<double>();
    opt->beta2 = oj.at("beta2").get<double>();
    opt->eps = oj.at("eps").get<double>();
    const auto otab = read_index(oj);
    for (size_t i = 0; i < reg.params.size(); ++i) {
      const std::string& pname = reg.params[i].first;
      for (const char* suffix : {".adam_m", ".adam_v"}) {
        auto it = otab.find(pname + suffix);
        if (it == otab.end())
          throw std::runtime_error("checkpoint: missing optimizer slot " + pname + suffix);
        read_tensor(dir, it->second, suffix[6] == 'm' ? opt->m[i] : opt->v[i]);
      }
    }
  }

  if (ts) {
    if (!index.contains("trainer"))
      throw std::runtime_error("checkpoint: no trainer state in " + dir);
    const json& tj = index.at("trainer");
    ts->next_epoch = tj.at("next_epoch").get<int64_t>();
    ts->global_step = tj.at("global_step").get<int64_t>();
    ts->lr = tj.at("lr").get<double>();
    ts->best_val = tj.at("best_val").get<double>();
  }
}

std::unique_ptr<ModelAdapter> load_model_from_checkpoint(const std::string& dir,
                                                         RunConfig* cfg_out) {
  RunConfig cfg = read_checkpoint_config(dir);
  auto model = make_model(cfg);
  load_checkpoint_into(dir, model->registry(), nullptr, nullptr);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

}  // namespace sdccrn
