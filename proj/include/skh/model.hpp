// Bundles everything a forward pass needs: config, vocabulary and the
// parameter registry, created in one deterministic order from the seed.

#ifndef SKH_MODEL_HPP
#define SKH_MODEL_HPP

#include "skh/config.hpp"
#include "skh/params.hpp"
#include "skh/vocab.hpp"

namespace skh {

struct Model {
  ModelConfig config;
  Vocab vocab;
  ParamRegistry params;
};

// Registers embed, encoder and planner parameters. Initialization draws
// from a stream forked off the config seed, so identical (seed, config,
// vocab) triples give identical parameters.
void add_model_params(Model& model);

void add_planner_params(ParamRegistry& reg, const ModelConfig& config, RngStream& rng);

}  // namespace skh

#endif  // SKH_MODEL_HPP
