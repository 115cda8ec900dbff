// Multi-task training loss: cross-entropy over both pointer streams plus the
// entity-matching penalty. The matching term is computed on teacher-forced
// argmax predictions; it has no gradient path and is folded into the
// reported total as a constant.

#ifndef SKH_LOSS_HPP
#define SKH_LOSS_HPP

#include "skh/planner.hpp"

namespace skh {

Var loss_triples(const TeacherForced& tf);
Var loss_entities(const TeacherForced& tf);

// (1/p^2) * sum_t (map(K_t) - E_t)^2 over predicted indices, where map sends
// a predicted triple to its parent entity and both stop symbols map to p.
// mode "indicator" replaces the squared difference by 0/1 disagreement.
double loss_matching(const std::vector<std::size_t>& k_argmax,
                     const std::vector<std::size_t>& e_argmax, const StructuredInput& input,
                     const std::string& mode = "squared");

struct LossParts {
  Var objective;  // w_k * L_k + w_e * L_e, differentiable
  double l_k = 0.0;
  double l_e = 0.0;
  double l_m = 0.0;
  double total = 0.0;  // w_k*l_k + w_e*l_e + w_m*l_m
};

LossParts compute_losses(Tape& tape, const Example& example, const Vocab& vocab,
                         ParamRegistry& params, const ModelConfig& config,
                         const DropoutCtx& drop);

}  // namespace skh

#endif  // SKH_LOSS_HPP
