#include "skh/embed.hpp"

#include "skh/text.hpp"

namespace skh {

TripleTokenIds triple_token_ids(const KnowledgeTriple& triple, const StructuredInput& input,
                                const Vocab& vocab, CorpusMode mode) {
  TripleTokenIds ids;
  if (triple.is_hol) {
    ids.name = ids.attr = ids.value = ids.type = Vocab::kHol;
    return ids;
  }
  ids.name = vocab.id(input.entities[triple.entity_id].name);
  ids.attr = vocab.id(triple.attribute);
  ids.value = value_token_id(vocab, triple.value, triple.value_kind);
  ids.type = vocab.id(type_token(triple.value_kind, mode));
  return ids;
}

void add_embed_params(ParamRegistry& reg, const Vocab& vocab, const ModelConfig& config,
                      RngStream& rng) {
  const std::size_t v = vocab.size();
  reg.add("embed.name_table", Tensor::uniform(v, config.d_emb, 0.01, rng));
  reg.add("embed.attr_table", Tensor::uniform(v, config.d_emb, 0.01, rng));
  reg.add("embed.value_table", Tensor::uniform(v, config.d_emb, 0.01, rng));
  reg.add("embed.type_table", Tensor::uniform(v, config.d_emb, 0.01, rng));
  reg.add("embed.W_e", tf::xavier(4 * config.d_emb, config.d_model, rng));
  reg.add("embed.b_e", Tensor::zeros(1, config.d_model));
  if (config.mode == CorpusMode::kDialogue) {
    reg.add("embed.ctx.tok", Tensor::uniform(v, config.d_model, 0.01, rng));
    reg.add("embed.ctx.pos", Tensor::uniform(config.context_cap, config.d_model, 0.01, rng));
    tf::add_encoder_stack_params(reg, "embed.ctx", config.n_layers, config.d_model, rng);
  }
}

Var embed_numerical(Tape& tape, const StructuredInput& input, const Vocab& vocab,
                    ParamRegistry& reg, const ModelConfig& config) {
  std::vector<std::size_t> name_ids, attr_ids, value_ids, type_ids;
  for (const KnowledgeTriple& t : input.triples) {
    const TripleTokenIds ids = triple_token_ids(t, input, vocab, config.mode);
    name_ids.push_back(ids.name);
    attr_ids.push_back(ids.attr);
    value_ids.push_back(ids.value);
    type_ids.push_back(ids.type);
  }
  Var cat = ops::concat_cols({
      ops::gather_rows(tape.leaf(&reg.get("embed.name_table")), name_ids),
      ops::gather_rows(tape.leaf(&reg.get("embed.attr_table")), attr_ids),
      ops::gather_rows(tape.leaf(&reg.get("embed.value_table")), value_ids),
      ops::gather_rows(tape.leaf(&reg.get("embed.type_table")), type_ids),
  });
  Var out = ops::relu(
      ops::linear(cat, tape.leaf(&reg.get("embed.W_e")), tape.leaf(&reg.get("embed.b_e"))));
  tf::check_finite(tape, out, "embed.numerical");
  return out;
}

std::vector<std::size_t> context_sequence_ids(const KnowledgeTriple& triple,
                                              const StructuredInput& input, const Vocab& vocab,
                                              const ModelConfig& config) {
  std::vector<std::size_t> triple_ids;
  if (triple.is_hol) {
    triple_ids.push_back(Vocab::kHol);
  } else {
    for (const std::string& t : tokenize(input.entities[triple.entity_id].name))
      triple_ids.push_back(vocab.id(t));
    for (const std::string& t : tokenize(triple.attribute)) triple_ids.push_back(vocab.id(t));
    if (triple.value_kind == ValueKind::kNumber) {
      triple_ids.push_back(value_token_id(vocab, triple.value, triple.value_kind));
    } else {
      for (const std::string& t : tokenize(triple.value)) triple_ids.push_back(vocab.id(t));
    }
    triple_ids.push_back(vocab.id(type_token(triple.value_kind, config.mode)));
  }

  std::vector<std::size_t> ctx_ids;
  for (const std::string& u : input.context)
    for (const std::string& t : tokenize(u)) ctx_ids.push_back(vocab.id(t));

  // CLS + ctx + SEP + triple + SEP, dropping the oldest context tokens first
  const std::size_t fixed = 1 + 1 + triple_ids.size() + 1;
  if (fixed > config.context_cap)
    throw ValidationError("triple token sequence exceeds the context cap");
  const std::size_t ctx_budget = config.context_cap - fixed;
  if (ctx_ids.size() > ctx_budget)
    ctx_ids.erase(ctx_ids.begin(),
                  ctx_ids.begin() + static_cast<std::ptrdiff_t>(ctx_ids.size() - ctx_budget));

  std::vector<std::size_t> seq;
  seq.push_back(Vocab::kCls);
  seq.insert(seq.end(), ctx_ids.begin(), ctx_ids.end());
  seq.push_back(Vocab::kSep);
  seq.insert(seq.end(), triple_ids.begin(), triple_ids.end());
  seq.push_back(Vocab::kSep);
  return seq;
}

Var embed_context_aware(Tape& tape, const StructuredInput& input, const Vocab& vocab,
                        ParamRegistry& reg, const ModelConfig& config, const DropoutCtx& drop) {
  std::vector<Var> rows;
  for (const KnowledgeTriple& t : input.triples) {
    const std::vector<std::size_t> seq = context_sequence_ids(t, input, vocab, config);
    std::vector<std::size_t> positions(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) positions[i] = i;
    Var x = ops::add(ops::gather_rows(tape.leaf(&reg.get("embed.ctx.tok")), seq),
                     ops::gather_rows(tape.leaf(&reg.get("embed.ctx.pos")), positions));
    const Tensor mask = Tensor::zeros(seq.size(), seq.size());
    Var enc = tf::encoder_stack(tape, x, mask, reg, "embed.ctx", config.n_layers,
                                config.n_heads, drop, nullptr);
    rows.push_back(ops::slice_rows(enc, 0, 1));
  }
  Var out = ops::vstack(rows);
  tf::check_finite(tape, out, "embed.context");
  return out;
}

Var embed_triples(Tape& tape, const StructuredInput& input, const Vocab& vocab,
                  ParamRegistry& reg, const ModelConfig& config, const DropoutCtx& drop) {
  if (config.mode == CorpusMode::kDialogue)
    return embed_context_aware(tape, input, vocab, reg, config, drop);
  return embed_numerical(tape, input, vocab, reg, config);
}

}  // namespace skh
