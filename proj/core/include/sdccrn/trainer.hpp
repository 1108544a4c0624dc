#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sdccrn/config.hpp"
#include "sdccrn/mixer.hpp"
#include "sdccrn/model.hpp"

namespace sdccrn {

// Adaptive moment estimation; slot order follows registry registration order,
// names are attached only at (de)serialization time.
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<NdArray<float>> m, v;

  explicit Adam(const ParamRegistry<float>& reg);
  void step(ParamRegistry<float>& reg, double lr);
};

// Euclidean norm over every parameter gradient; scales grads in place when
// the norm exceeds max_norm. Returns the pre-clip norm.
double clip_grad_norm(ParamRegistry<float>& reg, double max_norm);

// Type-erased trainable enhancer so the training loop and the CLI do not
// care which architecture is behind it.
struct ModelAdapter {
  virtual ~ModelAdapter() = default;
  virtual Var<float> forward(const NdArray<float>& noisy, bool training) = 0;
  virtual ParamRegistry<float>& registry() = 0;
  virtual const ParamRegistry<float>& registry() const = 0;
  virtual const AnalysisConfig& analysis() const = 0;
  virtual std::string kind() const = 0;
  // Non-null only for the cascaded model (streaming, alpha reporting).
  virtual const SdccrnModel<float>* sdccrn() const { return nullptr; }
};

std::unique_ptr<ModelAdapter> make_model(const RunConfig& cfg);

struct ValStats {
  double total = 0;
  double si_snr_db = 0;
  double si_snri_db = 0;
};

struct TrainerState {
  int64_t next_epoch = 0;  // 0-based; logs print 1-based
  int64_t global_step = 0;
  double lr = 0;  // current plateau-schedule rate (ignored by warmup-fixed)
  double best_val = std::numeric_limits<double>::infinity();
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, ModelAdapter& model, const DataProvider& data);

  // Loads parameters, optimizer state, and progress from a checkpoint dir.
  void resume_from(const std::string& ckpt_dir);

  // Runs the remaining epochs; per-step CSV goes to <checkpoint_dir>/train_log.csv,
  // per-epoch validation to <checkpoint_dir>/val_log.csv. Aborts on non-finite loss.
  void run(std::ostream& console);

  // Schedule rate for a 0-based epoch (warmup-fixed is a pure function; the
  // plateau schedule reports its current state).
  double lr_for_epoch(int64_t epoch) const;

  ValStats validate();

  const TrainerState& state() const { return state_; }

 private:
  void save(const std::string& dir_name);

  RunConfig cfg_;
  ModelAdapter& model_;
  const DataProvider& data_;
  std::unique_ptr<Adam> opt_;
  TrainerState state_;
};

}  // namespace sdccrn
