#include "skh/encoder.hpp"

namespace skh {

Tensor build_local_mask(const StructuredInput& input) {
  const std::size_t n = input.n_total();
  Tensor m = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (input.triples[i].entity_id != input.triples[j].entity_id) m.at(i, j) = kBlock;
  return m;
}

Tensor build_global_mask(std::size_t n_total) { return Tensor::zeros(n_total, n_total); }

std::vector<std::size_t> hol_positions(const StructuredInput& input) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < input.triples.size(); ++i)
    if (input.triples[i].is_hol) pos.push_back(i);
  return pos;
}

void add_encoder_params(ParamRegistry& reg, const ModelConfig& config, RngStream& rng) {
  const std::size_t iters = config.shared_fusion ? 1 : config.n_fusion;
  for (std::size_t f = 0; f < iters; ++f) {
    const std::string p = "enc.f" + std::to_string(f);
    tf::add_encoder_stack_params(reg, p + ".local", config.n_layers, config.d_model, rng);
    tf::add_encoder_stack_params(reg, p + ".global", config.n_layers, config.d_model, rng);
  }
  tf::add_pool_stack_params(reg, "enc.pool", config.d_model, rng);
}

EncodeOut encode(Tape& tape, Var embeddings, const StructuredInput& input, ParamRegistry& reg,
                 const ModelConfig& config, const DropoutCtx& drop, EncodeProbes* probes) {
  const Tensor local_mask = build_local_mask(input);
  const Tensor global_mask = build_global_mask(input.n_total());
  Var x = embeddings;
  for (std::size_t f = 0; f < config.n_fusion; ++f) {
    const std::string p = "enc.f" + std::to_string(config.shared_fusion ? 0 : f);
    Var local = tf::encoder_stack(tape, x, local_mask, reg, p + ".local", config.n_layers,
                                  config.n_heads, drop, probes ? &probes->local_attn : nullptr);
    Var global = tf::encoder_stack(tape, x, global_mask, reg, p + ".global", config.n_layers,
                                   config.n_heads, drop,
                                   probes ? &probes->global_attn : nullptr);
    x = ops::gated_fusion(local, global);
    tf::check_finite(tape, x, p + ".fusion");
  }
  const std::vector<std::size_t> hol = hol_positions(input);
  Var hol_rows = ops::gather_rows(x, hol);
  const Tensor pool_mask = Tensor::zeros(hol.size(), hol.size());
  Var he = tf::pool_stack(tape, hol_rows, pool_mask, reg, "enc.pool", config.n_heads, drop);
  return EncodeOut{x, he};
}

}  // namespace skh
