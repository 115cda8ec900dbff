// Triple embedders: the table-mode four-slot lookup embedding and the
// dialogue-mode context-aware CLS-pooled embedding.

#ifndef SKH_EMBED_HPP
#define SKH_EMBED_HPP

#include <vector>

#include "skh/config.hpp"
#include "skh/params.hpp"
#include "skh/schema.hpp"
#include "skh/tape.hpp"
#include "skh/transformer.hpp"
#include "skh/vocab.hpp"

namespace skh {

struct TripleTokenIds {
  std::size_t name = Vocab::kUnk;
  std::size_t attr = Vocab::kUnk;
  std::size_t value = Vocab::kUnk;
  std::size_t type = Vocab::kUnk;
};

TripleTokenIds triple_token_ids(const KnowledgeTriple& triple, const StructuredInput& input,
                                const Vocab& vocab, CorpusMode mode);

void add_embed_params(ParamRegistry& reg, const Vocab& vocab, const ModelConfig& config,
                      RngStream& rng);

// Row i = relu(W_e [n;a;v;t] + b_e) for triple i; sentinel rows use the HOL
// token in all four slots. Output n_total x d_model.
Var embed_numerical(Tape& tape, const StructuredInput& input, const Vocab& vocab,
                    ParamRegistry& reg, const ModelConfig& config);

// Per triple: encode CLS + context + SEP + triple tokens + SEP with the small
// shared encoder and return the CLS hidden state. Context is truncated from
// its front when the sequence would exceed the cap; the triple side never is.
Var embed_context_aware(Tape& tape, const StructuredInput& input, const Vocab& vocab,
                        ParamRegistry& reg, const ModelConfig& config, const DropoutCtx& drop);

// Mode dispatch: table -> numerical, dialogue -> context-aware.
Var embed_triples(Tape& tape, const StructuredInput& input, const Vocab& vocab,
                  ParamRegistry& reg, const ModelConfig& config, const DropoutCtx& drop);

// Token sequence (ids) for one triple in context-aware mode, post-truncation.
std::vector<std::size_t> context_sequence_ids(const KnowledgeTriple& triple,
                                              const StructuredInput& input, const Vocab& vocab,
                                              const ModelConfig& config);

}  // namespace skh

#endif  // SKH_EMBED_HPP
