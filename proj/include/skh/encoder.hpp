// Entity-centric local/global encoder: a local stack restricted to
// intra-entity attention, a global stack with unrestricted attention, a
// parameter-free sigmoid-gated fusion of the two (iterated n_fusion times),
// and an attention pooling stack over the sentinel rows that yields one
// vector per entity.

#ifndef SKH_ENCODER_HPP
#define SKH_ENCODER_HPP

#include <vector>

#include "skh/config.hpp"
#include "skh/params.hpp"
#include "skh/schema.hpp"
#include "skh/tape.hpp"
#include "skh/transformer.hpp"

namespace skh {

// Block-diagonal: position i may attend to j iff they share an entity block
// (the sentinel row belongs to its entity's block).
Tensor build_local_mask(const StructuredInput& input);
Tensor build_global_mask(std::size_t n_total);

// Attention probability matrices captured during encoding, appended in
// (fusion iteration, layer, head) order.
struct EncodeProbes {
  std::vector<Tensor> local_attn;
  std::vector<Tensor> global_attn;
};

struct EncodeOut {
  Var H;   // n_total x d_model fused triple states
  Var He;  // p x d_model entity states pooled from sentinel rows
};

void add_encoder_params(ParamRegistry& reg, const ModelConfig& config, RngStream& rng);

EncodeOut encode(Tape& tape, Var embeddings, const StructuredInput& input, ParamRegistry& reg,
                 const ModelConfig& config, const DropoutCtx& drop,
                 EncodeProbes* probes = nullptr);

// Positions of the sentinel rows, one per entity, in entity order.
std::vector<std::size_t> hol_positions(const StructuredInput& input);

}  // namespace skh

#endif  // SKH_ENCODER_HPP
