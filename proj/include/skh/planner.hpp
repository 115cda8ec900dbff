// Hierarchical pointer planner. An entity selector and a knowledge selector
// run in lockstep: both are transformer decoders over the chosen prefix, the
// knowledge state is the elementwise sum of its decoder output and the
// entity state, and both score candidates with additive pointer attention.
// A learned STOP row is appended to each candidate set; candidate index p
// (entities) and n_total (triples) mean STOP.

#ifndef SKH_PLANNER_HPP
#define SKH_PLANNER_HPP

#include <string>
#include <vector>

#include "skh/model.hpp"
#include "skh/schema.hpp"
#include "skh/tape.hpp"
#include "skh/transformer.hpp"

namespace skh {

struct DecodeState {
  std::vector<std::size_t> entities;  // chosen entity candidate per step (p = STOP)
  std::vector<std::size_t> triples;   // chosen triple candidate per step (n_total = STOP)
  double log_prob = 0.0;              // sum over both streams, all steps so far
  std::size_t step() const { return triples.size(); }
};

// Encoder outputs frozen into plain tensors; decoding needs no gradients.
struct DecodeContext {
  const StructuredInput* input = nullptr;
  ParamRegistry* params = nullptr;
  const ModelConfig* config = nullptr;
  Tensor H;   // n_total x d_model
  Tensor He;  // p x d_model
};

DecodeContext make_decode_context(const StructuredInput& input, const Vocab& vocab,
                                  ParamRegistry& params, const ModelConfig& config);

struct StepDists {
  Tensor entity_dist;     // 1 x (p+1)
  Tensor entity_log;      // 1 x (p+1)
  Tensor knowledge_dist;  // 1 x (n_total+1)
  Tensor knowledge_log;   // 1 x (n_total+1)
};

// Distributions for the next step after state's prefix. block_stop_* force
// the respective STOP candidate to BLOCK (used to pin degenerate cases).
StepDists step_distributions(const DecodeContext& ctx, const DecodeState& state,
                             bool no_repeat, bool block_stop_entity = false,
                             bool block_stop_knowledge = false);

Plan decode_greedy(const DecodeContext& ctx, std::size_t max_len, bool no_repeat,
                   double* out_log_prob = nullptr);
Plan decode_beam(const DecodeContext& ctx, std::size_t beam, std::size_t max_len,
                 bool no_repeat, double* out_log_prob = nullptr);

// Teacher-forced pass over the gold plan plus the closing STOP step.
struct TeacherForced {
  Var elog;  // T x (p+1) log-probabilities
  Var klog;  // T x (n_total+1)
  std::vector<std::size_t> e_targets;  // gold entities then p
  std::vector<std::size_t> k_targets;  // gold triples then n_total
  std::vector<std::size_t> e_argmax;   // per-step argmax under the same masks
  std::vector<std::size_t> k_argmax;
};

TeacherForced teacher_forced(Tape& tape, const Example& example, const Vocab& vocab,
                             ParamRegistry& params, const ModelConfig& config,
                             const DropoutCtx& drop);

// Lowest index wins ties.
std::size_t argmax_row(const Tensor& t, std::size_t row);

// Plan file records; triple indices are stored in the corpus convention
// (sentinels excluded) and mapped back on load.
struct PlannedExample {
  std::string id;
  Plan plan;
  double log_prob = 0.0;
};

void save_plan_file(const std::string& path, const std::vector<PlannedExample>& plans,
                    const std::vector<const StructuredInput*>& inputs);
std::vector<PlannedExample> load_plan_file(const std::string& path,
                                           const std::vector<Example>& corpus);

}  // namespace skh

#endif  // SKH_PLANNER_HPP
