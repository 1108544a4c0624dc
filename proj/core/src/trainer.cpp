#include "sdccrn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "sdccrn/checkpoint.hpp"
#include "sdccrn/losses.hpp"

namespace sdccrn {

Adam::Adam(const ParamRegistry<float>& reg) {
  m.reserve(reg.params.size());
  v.reserve(reg.params.size());
  for (const auto& [_, p] : reg.params) {
    m.emplace_back(p.shape());
    v.emplace_back(p.shape());
  }
}

void Adam::step(ParamRegistry<float>& reg, double lr) {
  if (m.size() != reg.params.size()) throw std::logic_error("adam: slot count mismatch");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < reg.params.size(); ++i) {
    auto& p = reg.params[i].second;
    if (!p.node()->has_grad) continue;
    const float* g = p.node()->grad.data();
    float* mv = m[i].data();
    float* vv = v[i].data();
    float* w = p.val().data();
    const int64_t n = p.numel();
    for (int64_t k = 0; k < n; ++k) {
      const double gk = g[k];
      const double mk = beta1 * mv[k] + (1.0 - beta1) * gk;
      const double vk = beta2 * vv[k] + (1.0 - beta2) * gk * gk;
      mv[k] = static_cast<float>(mk);
      vv[k] = static_cast<float>(vk);
      w[k] = static_cast<float>(w[k] - lr * (mk / bc1) / (std::sqrt(vk / bc2) + eps));
    }
  }
}

double clip_grad_norm(ParamRegistry<float>& reg, double max_norm) {
  double ss = 0.0;
  for (const auto& [_, p] : reg.params) {
    if (!p.node()->has_grad) continue;
    const float* g = p.node()->grad.data();
    for (int64_t k = 0; k < p.numel(); ++k) ss += static_cast<double>(g[k]) * g[k];
  }
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& [_, p] : reg.params) {
      if (!p.node()->has_grad) continue;
      float* g = p.node()->grad.data();
      for (int64_t k = 0; k < p.numel(); ++k) g[k] *= s;
    }
  }
  return norm;
}

namespace {

struct SdccrnAdapter final : ModelAdapter {
  SdccrnModel<float> model;

  explicit SdccrnAdapter(const ModelSpec& s) : model(s) {}
  Var<float> forward(const NdArray<float>& noisy, bool training) override {
    return model.forward(Var<float>::constant(noisy), training);
  }
  ParamRegistry<float>& registry() override { return model.reg; }
  const ParamRegistry<float>& registry() const override { return model.reg; }
  const AnalysisConfig& analysis() const override { return model.spec.analysis; }
  std::string kind() const override { return "sdccrn"; }
  const SdccrnModel<float>* sdccrn() const override { return &model; }
};

struct BaselineAdapter final : ModelAdapter {
  BaselineModel<float> model;

  explicit BaselineAdapter(const BaselineSpec& s) : model(s) {}
  Var<float> forward(const NdArray<float>& noisy, bool training) override {
    return model.forward(Var<float>::constant(noisy), training);
  }
  ParamRegistry<float>& registry() override { return model.reg; }
  const ParamRegistry<float>& registry() const override { return model.reg; }
  const AnalysisConfig& analysis() const override { return model.spec.analysis; }
  std::string kind() const override { return "baseline"; }
};

}  // namespace

std::unique_ptr<ModelAdapter> make_model(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.model_kind == "baseline") return std::make_unique<BaselineAdapter>(cfg.baseline);
  return std::make_unique<SdccrnAdapter>(cfg.model);
}

Trainer::Trainer(const RunConfig& cfg, ModelAdapter& model, const DataProvider& data)
    : cfg_(cfg), model_(model), data_(data) {
  cfg_.validate();
  opt_ = std::make_unique<Adam>(model_.registry());
  state_.lr = cfg_.main_lr;
}

void Trainer::resume_from(const std::string& ckpt_dir) {
  TrainerState ts;
  load_checkpoint_into(ckpt_dir, model_.registry(), opt_.get(), &ts);
  state_ = ts;
}

double Trainer::lr_for_epoch(int64_t epoch) const {
  if (cfg_.schedule == "warmup-fixed")
    return epoch < cfg_.warmup_epochs ? cfg_.warmup_lr : cfg_.main_lr;
  return state_.lr;
}

ValStats Trainer::validate() {
  NoGradGuard guard;
  double w = 0, tot = 0, si = 0, sii = 0;
  for (const Batch& b : data_.val_batches()) {
    Var<float> est = model_.forward(b.noisy, false);
    LossReport<float> rep = total_loss(est, b.clean, model_.analysis());
    const double noisy_si =
        si_snr_op(Var<float>::constant(b.noisy), b.clean).val()[0];
    const double n = static_cast<double>(b.noisy.shape()[0]);
    tot += rep.total.val()[0] * n;
    si += rep.si_snr_db * n;
    sii += (rep.si_snr_db - noisy_si) * n;
    w += n;
  }
  if (w == 0)
    return {std::numeric_limits<double>::quiet_NaN(), 0, 0};  // no validation set
  return {tot / w, si / w, sii / w};
}

void Trainer::save(const std::string& dir_name) {
  save_checkpoint(cfg_.checkpoint_dir + "/" + dir_name, cfg_, model_.registry(), opt_.get(),
                  &state_);
}

void Trainer::run(std::ostream& console) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.checkpoint_dir);

  std::ofstream log(cfg_.checkpoint_dir + "/train_log.csv", std::ios::app);
  if (!log) throw std::runtime_error("cannot write " + cfg_.checkpoint_dir + "/train_log.csv");
  if (log.tellp() == 0) log << "step,si_snr_db,cmse,kl,total,lr\n";
  std::ofstream vlog(cfg_.checkpoint_dir + "/val_log.csv", std::ios::app);
  if (vlog.tellp() == 0) vlog << "epoch,val_total,val_si_snr_db,val_si_snri_db,lr\n";

  const int64_t steps = data_.steps_per_epoch();
  char line[320];

  for (int64_t epoch = state_.next_epoch; epoch < cfg_.epochs; ++epoch) {
    const double lr = lr_for_epoch(epoch);
    for (int64_t step = 0; step < steps; ++step) {
      Batch b = data_.train_batch(epoch, step);
      model_.registry().zero_grads();
      Var<float> est = model_.forward(b.noisy, true);
      LossReport<float> rep = total_loss(est, b.clean, model_.analysis());
      const double total = rep.total.val()[0];
      if (!std::isfinite(total))
        throw std::runtime_error("training aborted: non-finite loss at step " +
                                 std::to_string(state_.global_step + 1));
      backward(rep.total);
      clip_grad_norm(model_.registry(), cfg_.grad_clip);
      opt_->step(model_.registry(), lr);
      ++state_.global_step;
      std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g",
                    static_cast<long long>(state_.global_step),
                    static_cast<double>(rep.si_snr_db), static_cast<double>(rep.cmse),
                    static_cast<double>(rep.kl), total, lr);
      log << line << '\n';
      log.flush();
    }

    const ValStats vs = validate();
    state_.next_epoch = epoch + 1;
    const bool has_val = std::isfinite(vs.total);
    const bool improved = has_val && vs.total < state_.best_val;
    if (improved) state_.best_val = vs.total;
    if (cfg_.schedule == "plateau-halving" && has_val && !improved) state_.lr *= 0.5;
    if (improved) save("best");
    save("last");

    if (has_val) {
      std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.9g",
                    static_cast<long long>(epoch + 1), vs.total, vs.si_snr_db, vs.si_snri_db, lr);
      vlog << line << '\n';
      vlog.flush();
      std::snprintf(line, sizeof line,
                    "epoch %lld/%d lr %.9g val_total %.4f val_si_snr %.2f dB val_si_snri %.2f dB",
                    static_cast<long long>(epoch + 1), cfg_.epochs, lr, vs.total, vs.si_snr_db,
                    vs.si_snri_db);
    } else {
      std::snprintf(line, sizeof line, "epoch %lld/%d lr %.9g (no validation set)",
                    static_cast<long long>(epoch + 1), cfg_.epochs, lr);
    }
    console << line << std::endl;
  }

  save("last");  // covers epochs == 0 and makes completion idempotent
}

}  // namespace sdccrn
