#pragma once

#include <memory>
#include <string>

#include "sdccrn/config.hpp"
#include "sdccrn/trainer.hpp"

namespace sdccrn {

// Checkpoint directory layout:
//   index.json   tensor table: name -> {shape, dtype, offset, file}, plus
//                optimizer scalars and trainer progress
//   params.bin   raw little-endian float32: parameters, then batch-norm
//                running statistics
//   opt.bin      raw little-endian float32: first-moment then second-moment
//                slot per parameter (only when optimizer state is saved)
//   config.json  RunConfig snapshot
void save_checkpoint(const std::string& dir, const RunConfig& cfg,
                     const ParamRegistry<float>& reg, const Adam* opt, const TrainerState* ts);

RunConfig read_checkpoint_config(const std::string& dir);

// Loads tensors by name into an already-constructed registry (shapes must
// match). opt/ts may be null when only inference state is wanted.
void load_checkpoint_into(const std::string& dir, ParamRegistry<float>& reg, Adam* opt,
                          TrainerState* ts);

// Convenience: rebuild the model from the stored config and load its weights.
std::unique_ptr<ModelAdapter> load_model_from_checkpoint(const std::string& dir,
                                                         RunConfig* cfg_out = nullptr);

}  // namespace sdccrn
