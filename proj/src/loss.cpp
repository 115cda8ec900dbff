#include "skh/loss.hpp"

namespace skh {

Var loss_triples(const TeacherForced& tf) {
  return ops::nll_from_log_probs(tf.klog, tf.k_targets);
}

Var loss_entities(const TeacherForced& tf) {
  return ops::nll_from_log_probs(tf.elog, tf.e_targets);
}

double loss_matching(const std::vector<std::size_t>& k_argmax,
                     const std::vector<std::size_t>& e_argmax, const StructuredInput& input,
                     const std::string& mode) {
  if (k_argmax.size() != e_argmax.size())
    throw DimensionError("matching loss needs one entity per triple step");
  const std::size_t p = input.n_entities();
  const std::size_t n = input.n_total();
  const bool indicator = mode == "indicator";
  double sum = 0.0;
  for (std::size_t t = 0; t < k_argmax.size(); ++t) {
    const double mapped = k_argmax[t] >= n
                              ? static_cast<double>(p)
                              : static_cast<double>(input.triples[k_argmax[t]].entity_id);
    const double chosen = static_cast<double>(e_argmax[t]);
    if (indicator) {
      sum += mapped == chosen ? 0.0 : 1.0;
    } else {
      const double diff = mapped - chosen;
      sum += diff * diff;
    }
  }
  return sum / (static_cast<double>(p) * static_cast<double>(p));
}

LossParts compute_losses(Tape& tape, const Example& example, const Vocab& vocab,
                         ParamRegistry& params, const ModelConfig& config,
                         const DropoutCtx& drop) {
  const TeacherForced tf = teacher_forced(tape, example, vocab, params, config, drop);
  LossParts out;
  Var lk = loss_triples(tf);
  Var le = loss_entities(tf);
  out.l_k = tape.value(lk).item();
  out.l_e = tape.value(le).item();
  out.l_m = loss_matching(tf.k_argmax, tf.e_argmax, example.input, config.matching_mode);
  out.objective = ops::add(ops::scale(lk, config.w_k), ops::scale(le, config.w_e));
  out.total = config.w_k * out.l_k + config.w_e * out.l_e + config.w_m * out.l_m;
  return out;
}

}  // namespace skh
