// Pre-norm transformer building blocks assembled from tape primitives.
// Parameters live in a ParamRegistry under dotted prefixes so stacks can be
// created, walked and checkpointed by name.

#ifndef SKH_TRANSFORMER_HPP
#define SKH_TRANSFORMER_HPP

#include <cmath>
#include <string>
#include <vector>

#include "skh/params.hpp"
#include "skh/tape.hpp"

namespace skh {

// Dropout is active only during training; masks are drawn from a stream the
// caller seeds per step, so traces reproduce exactly.
struct DropoutCtx {
  bool active = false;
  double p = 0.0;
  RngStream* rng = nullptr;
};

inline Var maybe_dropout(Tape& t, Var x, const DropoutCtx& ctx) {
  if (!ctx.active || ctx.p <= 0.0 || ctx.rng == nullptr) return x;
  const Tensor& v = t.value(x);
  return ops::dropout_mask(x, ops::make_keep_mask(v.rows(), v.cols(), ctx.p, *ctx.rng));
}

namespace tf {

inline Tensor xavier(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(fan_in, fan_out, a, rng);
}

inline void add_attn_params(ParamRegistry& reg, const std::string& p, std::size_t d,
                            RngStream& rng) {
  reg.add(p + ".wq", xavier(d, d, rng));
  reg.add(p + ".bq", Tensor::zeros(1, d));
  reg.add(p + ".wk", xavier(d, d, rng));
  reg.add(p + ".bk", Tensor::zeros(1, d));
  reg.add(p + ".wv", xavier(d, d, rng));
  reg.add(p + ".bv", Tensor::zeros(1, d));
  reg.add(p + ".wo", xavier(d, d, rng));
  reg.add(p + ".bo", Tensor::zeros(1, d));
}

inline void add_ln_params(ParamRegistry& reg, const std::string& p, std::size_t d) {
  reg.add(p + ".g", Tensor::full(1, d, 1.0));
  reg.add(p + ".b", Tensor::zeros(1, d));
}

inline void add_ffn_params(ParamRegistry& reg, const std::string& p, std::size_t d,
                           RngStream& rng) {
  const std::size_t h = 4 * d;
  reg.add(p + ".w1", xavier(d, h, rng));
  reg.add(p + ".b1", Tensor::zeros(1, h));
  reg.add(p + ".w2", xavier(h, d, rng));
  reg.add(p + ".b2", Tensor::zeros(1, d));
}

inline void add_encoder_layer_params(ParamRegistry& reg, const std::string& p, std::size_t d,
                                     RngStream& rng) {
  add_ln_params(reg, p + ".ln1", d);
  add_attn_params(reg, p + ".attn", d, rng);
  add_ln_params(reg, p + ".ln2", d);
  add_ffn_params(reg, p + ".ffn", d, rng);
}

inline void add_decoder_layer_params(ParamRegistry& reg, const std::string& p, std::size_t d,
                                     RngStream& rng) {
  add_ln_params(reg, p + ".ln1", d);
  add_attn_params(reg, p + ".self", d, rng);
  add_ln_params(reg, p + ".ln2", d);
  add_attn_params(reg, p + ".cross", d, rng);
  add_ln_params(reg, p + ".ln3", d);
  add_ffn_params(reg, p + ".ffn", d, rng);
}

// Encoder stack: n_layers full layers plus a closing layer norm.
inline void add_encoder_stack_params(ParamRegistry& reg, const std::string& p,
                                     std::size_t n_layers, std::size_t d, RngStream& rng) {
  for (std::size_t l = 0; l < n_layers; ++l)
    add_encoder_layer_params(reg, p + ".l" + std::to_string(l), d, rng);
  add_ln_params(reg, p + ".ln", d);
}

inline void add_decoder_stack_params(ParamRegistry& reg, const std::string& p,
                                     std::size_t n_layers, std::size_t d, RngStream& rng) {
  for (std::size_t l = 0; l < n_layers; ++l)
    add_decoder_layer_params(reg, p + ".l" + std::to_string(l), d, rng);
  add_ln_params(reg, p + ".ln", d);
}

// Attention-only pooling stack: one attention block plus a closing norm.
inline void add_pool_stack_params(ParamRegistry& reg, const std::string& p, std::size_t d,
                                  RngStream& rng) {
  add_ln_params(reg, p + ".ln1", d);
  add_attn_params(reg, p + ".attn", d, rng);
  add_ln_params(reg, p + ".ln", d);
}

inline Var layer_norm_named(Tape& t, Var x, ParamRegistry& reg, const std::string& p) {
  return ops::layer_norm(x, t.leaf(&reg.get(p + ".g")), t.leaf(&reg.get(p + ".b")));
}

// Multi-head attention. `mask` is Tq x Tk additive. When `probes` is given,
// each head's probability matrix is appended in head order.
inline Var mha(Tape& t, Var q_in, Var kv_in, const Tensor& mask, ParamRegistry& reg,
               const std::string& p, std::size_t n_heads, std::vector<Tensor>* probes) {
  const std::size_t d = t.value(q_in).cols();
  if (n_heads == 0 || d % n_heads != 0)
    throw DimensionError("d_model " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
  const std::size_t dh = d / n_heads;
  Var Q = ops::linear(q_in, t.leaf(&reg.get(p + ".wq")), t.leaf(&reg.get(p + ".bq")));
  Var K = ops::linear(kv_in, t.leaf(&reg.get(p + ".wk")), t.leaf(&reg.get(p + ".bk")));
  Var V = ops::linear(kv_in, t.leaf(&reg.get(p + ".wv")), t.leaf(&reg.get(p + ".bv")));
  std::vector<Var> heads;
  for (std::size_t h = 0; h < n_heads; ++h) {
    Var qh = ops::slice_cols(Q, h * dh, dh);
    Var kh = ops::slice_cols(K, h * dh, dh);
    Var vh = ops::slice_cols(V, h * dh, dh);
    Var scores = ops::scale(ops::matmul(qh, ops::transpose(kh)),
                            1.0 / std::sqrt(static_cast<double>(dh)));
    Var probs = ops::masked_softmax(scores, mask);
    if (probes != nullptr) probes->push_back(t.value(probs));
    heads.push_back(ops::matmul(probs, vh));
  }
  Var cat = n_heads == 1 ? heads[0] : ops::concat_cols(heads);
  return ops::linear(cat, t.leaf(&reg.get(p + ".wo")), t.leaf(&reg.get(p + ".bo")));
}

inline Var ffn(Tape& t, Var x, ParamRegistry& reg, const std::string& p) {
  Var h = ops::relu(ops::linear(x, t.leaf(&reg.get(p + ".w1")), t.leaf(&reg.get(p + ".b1"))));
  return ops::linear(h, t.leaf(&reg.get(p + ".w2")), t.leaf(&reg.get(p + ".b2")));
}

inline void check_finite(Tape& t, Var x, const std::string& where) {
  if (!t.value(x).all_finite()) throw NumericError(where + " produced non-finite values");
}

inline Var encoder_layer(Tape& t, Var x, const Tensor& mask, ParamRegistry& reg,
                         const std::string& p, std::size_t n_heads, const DropoutCtx& drop,
                         std::vector<Tensor>* probes) {
  Var n1 = layer_norm_named(t, x, reg, p + ".ln1");
  Var a = mha(t, n1, n1, mask, reg, p + ".attn", n_heads, probes);
  x = ops::add(x, maybe_dropout(t, a, drop));
  Var n2 = layer_norm_named(t, x, reg, p + ".ln2");
  Var f = ffn(t, n2, reg, p + ".ffn");
  x = ops::add(x, maybe_dropout(t, f, drop));
  check_finite(t, x, p);
  return x;
}

inline Var decoder_layer(Tape& t, Var x, Var memory, const Tensor& self_mask,
                         const Tensor& mem_mask, ParamRegistry& reg, const std::string& p,
                         std::size_t n_heads, const DropoutCtx& drop) {
  Var n1 = layer_norm_named(t, x, reg, p + ".ln1");
  Var a = mha(t, n1, n1, self_mask, reg, p + ".self", n_heads, nullptr);
  x = ops::add(x, maybe_dropout(t, a, drop));
  Var n2 = layer_norm_named(t, x, reg, p + ".ln2");
  Var c = mha(t, n2, memory, mem_mask, reg, p + ".cross", n_heads, nullptr);
  x = ops::add(x, maybe_dropout(t, c, drop));
  Var n3 = layer_norm_named(t, x, reg, p + ".ln3");
  Var f = ffn(t, n3, reg, p + ".ffn");
  x = ops::add(x, maybe_dropout(t, f, drop));
  check_finite(t, x, p);
  return x;
}

inline Var encoder_stack(Tape& t, Var x, const Tensor& mask, ParamRegistry& reg,
                         const std::string& p, std::size_t n_layers, std::size_t n_heads,
                         const DropoutCtx& drop, std::vector<Tensor>* probes) {
  for (std::size_t l = 0; l < n_layers; ++l)
    x = encoder_layer(t, x, mask, reg, p + ".l" + std::to_string(l), n_heads, drop, probes);
  return layer_norm_named(t, x, reg, p + ".ln");
}

inline Var decoder_stack(Tape& t, Var x, Var memory, const Tensor& self_mask,
                         const Tensor& mem_mask, ParamRegistry& reg, const std::string& p,
                         std::size_t n_layers, std::size_t n_heads, const DropoutCtx& drop) {
  for (std::size_t l = 0; l < n_layers; ++l)
    x = decoder_layer(t, x, memory, self_mask, mem_mask, reg, p + ".l" + std::to_string(l),
                      n_heads, drop);
  return layer_norm_named(t, x, reg, p + ".ln");
}

inline Var pool_stack(Tape& t, Var x, const Tensor& mask, ParamRegistry& reg,
                      const std::string& p, std::size_t n_heads, const DropoutCtx& drop) {
  Var n1 = layer_norm_named(t, x, reg, p + ".ln1");
  Var a = mha(t, n1, n1, mask, reg, p + ".attn", n_heads, nullptr);
  x = ops::add(x, maybe_dropout(t, a, drop));
  check_finite(t, x, p);
  return layer_norm_named(t, x, reg, p + ".ln");
}

// T x T causal mask: position i may attend to j <= i.
inline Tensor causal_mask(std::size_t T) {
  Tensor m = Tensor::zeros(T, T);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = i + 1; j < T; ++j) m.at(i, j) = kBlock;
  return m;
}

}  // namespace tf
}  // namespace skh

#endif  // SKH_TRANSFORMER_HPP
