#include "skh/model.hpp"

#include "skh/embed.hpp"
#include "skh/encoder.hpp"
#include "skh/transformer.hpp"

namespace skh {

void add_planner_params(ParamRegistry& reg, const ModelConfig& config, RngStream& rng) {
  const std::size_t d = config.d_model;
  const std::size_t pos_rows = config.effective_max_len() + 1;
  tf::add_decoder_stack_params(reg, "plan.edec", config.n_layers, d, rng);
  tf::add_decoder_stack_params(reg, "plan.kdec", config.n_layers, d, rng);
  reg.add("plan.e.W_he", tf::xavier(d, d, rng));
  reg.add("plan.e.W_e", tf::xavier(d, d, rng));
  reg.add("plan.e.v", tf::xavier(d, 1, rng));
  reg.add("plan.e.s0", Tensor::uniform(1, d, 0.01, rng));
  reg.add("plan.e.stop", Tensor::uniform(1, d, 0.01, rng));
  reg.add("plan.e.pos", Tensor::uniform(pos_rows, d, 0.01, rng));
  reg.add("plan.k.W_h", tf::xavier(d, d, rng));
  reg.add("plan.k.W_k", tf::xavier(d, d, rng));
  reg.add("plan.k.v", tf::xavier(d, 1, rng));
  reg.add("plan.k.s0", Tensor::uniform(1, d, 0.01, rng));
  reg.add("plan.k.stop", Tensor::uniform(1, d, 0.01, rng));
  reg.add("plan.k.pos", Tensor::uniform(pos_rows, d, 0.01, rng));
}

void add_model_params(Model& model) {
  model.config.validate();
  RngStream rng = RngStream(model.config.seed).fork(0xA11CE);
  add_embed_params(model.params, model.vocab, model.config, rng);
  add_encoder_params(model.params, model.config, rng);
  add_planner_params(model.params, model.config, rng);
}

}  // namespace skh
