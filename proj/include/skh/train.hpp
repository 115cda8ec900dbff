// Training loop: shuffled mini-batches built by per-example gradient
// accumulation (mean-scaled, so batch partitioning only changes step
// boundaries), global-norm clip, AdamW, per-epoch greedy-decode validation.
// The parameters from the best validation epoch are restored at the end.

#ifndef SKH_TRAIN_HPP
#define SKH_TRAIN_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "skh/model.hpp"
#include "skh/schema.hpp"

namespace skh {

struct TrainResult {
  std::vector<double> train_loss;  // mean total loss per epoch
  std::vector<double> val_ks_f1;   // micro KS-F1 per epoch; 0 when no val set
  double best_val_ks_f1 = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 when never evaluated
  std::uint64_t rng_state = 0;
};

// Every random choice forks off config.seed: shuffling from one stream,
// dropout masks from a fresh stream per example counter. `trace`, when set,
// receives one JSON line per batch and per epoch.
TrainResult train_model(Model& model, const std::vector<Example>& train_set,
                        const std::vector<Example>& val_set, std::ostream* trace = nullptr);

}  // namespace skh

#endif  // SKH_TRAIN_HPP
