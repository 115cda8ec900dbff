// Binary model checkpoints. Layout: magic "SKH1", a u64 byte length plus a
// canonical JSON header (format version, config, vocab tokens, rng state,
// best validation score), then every parameter in registry order as
// name length + name + rank + dims + values. Integers are u64 little-endian,
// values f64 little-endian, so identical models write identical bytes.

#ifndef SKH_CHECKPOINT_HPP
#define SKH_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "skh/model.hpp"

namespace skh {

struct CheckpointExtra {
  std::uint64_t rng_state = 0;
  double best_val_ks_f1 = 0.0;
};

void save_checkpoint(const std::string& path, const Model& model,
                     const CheckpointExtra& extra = {});

// Rebuilds the model from the stored config and vocab, then fills the
// parameters from the file.
Model load_checkpoint(const std::string& path, CheckpointExtra* extra = nullptr);

// Fills an existing model's parameters in place. Every stored tensor must
// match the model's shape; a mismatch raises a diagnostic naming the
// parameter and both shapes.
void load_checkpoint_params(const std::string& path, Model& model);

}  // namespace skh

#endif  // SKH_CHECKPOINT_HPP
