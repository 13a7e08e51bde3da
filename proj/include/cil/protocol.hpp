#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "cil/analysis.hpp"
#include "cil/losses.hpp"
#include "cil/network.hpp"
#include "cil/stream.hpp"

namespace cil {

enum class DecayMode { none, step_mult, per_epoch_mult };

const char* to_string(DecayMode m);
DecayMode decay_from_string(const std::string& s);

struct TrainSchedule {
  std::size_t epochs_base = 100;
  std::size_t epochs_inc = 60;
  std::size_t batch = 32;
  double lr0 = 0.05;
  double lr0_inc = 0.002;  // incremental stages; 0 means lr0
  // During increments the new expand layer is the plastic capacity; the
  // always-trainable adapt layer and head move at this fraction of the rate.
  double adapt_lr_scale = 0.1;
  double momentum = 0.9;
  DecayMode decay_mode = DecayMode::per_epoch_mult;
  std::size_t decay_at = 10;
  double decay_factor = 0.93;
  double max_grad_norm = 10.0;  // global clip per step; 0 disables
  std::uint64_t seed = 1;

  double stage_lr0(std::size_t task) const {
    return task == 0 || lr0_inc <= 0.0 ? lr0 : lr0_inc;
  }
};

// Pure function of (mode, epoch), epochs counted from 0.
//   step_mult:      lr0 * factor^[epoch >= decay_at]
//   per_epoch_mult: lr0 * factor^max(0, epoch - decay_at)
double lr_at(const TrainSchedule& s, std::size_t epoch);
// Same schedule shape anchored at the stage's own initial rate.
double lr_at_stage(const TrainSchedule& s, std::size_t task, std::size_t epoch);

// Observation points for tests and diagnostics; every callback may be empty.
// augment, when set, transforms each training batch before the forward pass
// (identity otherwise) — evaluation batches are never augmented.
struct RunHooks {
  std::function<void(std::size_t task, ModelState& m)> on_task_start;
  std::function<void(std::size_t task, std::size_t epoch, ModelState& m)>
      on_epoch_end;
  std::function<void(std::size_t task, ModelState& m)> on_task_end;
  std::function<Tensor(const Tensor& batch)> augment;
};

// The class-incremental loop: per task, grow the backbone and classifier,
// freeze everything task-specific that came before, train on the new task's
// data only, then evaluate on the union of all seen classes' test data.
RunReport run_incremental(ModelState& m, TaskStream& stream,
                          const TrainSchedule& sched, EtfClassifier etf,
                          const LossConfig& loss_cfg,
                          const RunHooks& hooks = {});

}  // namespace cil
