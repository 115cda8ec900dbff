#include "skh/planner.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "skh/embed.hpp"
#include "skh/encoder.hpp"

namespace skh {

namespace {

using Json = nlohmann::ordered_json;

Tensor row_of(const Tensor& t, std::size_t r) {
  Tensor out = Tensor::zeros(1, t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) out.data[j] = t.at(r, j);
  return out;
}

std::vector<std::size_t> step_positions(std::size_t T, std::size_t table_rows) {
  std::vector<std::size_t> pos(T);
  for (std::size_t i = 0; i < T; ++i) pos[i] = std::min(i, table_rows - 1);
  return pos;
}

// One causal pass over a chosen prefix; prefix length T-1 yields T rows of
// scores in both streams (row t scores the step after t chosen items).
struct PassOut {
  Var elog, klog;      // log-probabilities
  Var edist, kdist;    // probabilities
  Tensor emask, kmask;
};

PassOut run_pass(Tape& tape, Var H, Var He, const StructuredInput& input,
                 ParamRegistry& reg, const ModelConfig& config, const DropoutCtx& drop,
                 const std::vector<std::size_t>& prefix_entities,
                 const std::vector<std::size_t>& prefix_triples, bool no_repeat,
                 bool block_stop_entity, bool block_stop_knowledge) {
  const std::size_t p = input.n_entities();
  const std::size_t n = input.n_total();
  const std::size_t T = prefix_triples.size() + 1;
  if (prefix_entities.size() != prefix_triples.size())
    throw DimensionError("planner prefix streams disagree in length");

  Var cand_e = ops::vstack({He, tape.leaf(&reg.get("plan.e.stop"))});
  Var cand_k = ops::vstack({H, tape.leaf(&reg.get("plan.k.stop"))});

  const Tensor self_mask = tf::causal_mask(T);

  Var x_e = tape.leaf(&reg.get("plan.e.s0"));
  if (!prefix_entities.empty())
    x_e = ops::vstack({x_e, ops::gather_rows(cand_e, prefix_entities)});
  const auto pos_ids = step_positions(T, reg.get("plan.e.pos").rows());
  x_e = ops::add(x_e, ops::gather_rows(tape.leaf(&reg.get("plan.e.pos")), pos_ids));
  Var dec_e = tf::decoder_stack(tape, x_e, He, self_mask, Tensor::zeros(T, p), reg,
                                "plan.edec", config.n_layers, config.n_heads, drop);

  Var x_k = tape.leaf(&reg.get("plan.k.s0"));
  if (!prefix_triples.empty())
    x_k = ops::vstack({x_k, ops::gather_rows(cand_k, prefix_triples)});
  x_k = ops::add(x_k, ops::gather_rows(tape.leaf(&reg.get("plan.k.pos")), pos_ids));
  Var dec_k = tf::decoder_stack(tape, x_k, H, self_mask, Tensor::zeros(T, n), reg,
                                "plan.kdec", config.n_layers, config.n_heads, drop);
  Var s_k = ops::add(dec_k, dec_e);

  Var scores_e = ops::additive_scores(ops::matmul(cand_e, tape.leaf(&reg.get("plan.e.W_he"))),
                                      ops::matmul(dec_e, tape.leaf(&reg.get("plan.e.W_e"))),
                                      tape.leaf(&reg.get("plan.e.v")));
  Var scores_k = ops::additive_scores(ops::matmul(cand_k, tape.leaf(&reg.get("plan.k.W_h"))),
                                      ops::matmul(s_k, tape.leaf(&reg.get("plan.k.W_k"))),
                                      tape.leaf(&reg.get("plan.k.v")));

  PassOut out;
  out.emask = Tensor::zeros(T, p + 1);
  if (block_stop_entity)
    for (std::size_t t = 0; t < T; ++t) out.emask.at(t, p) = kBlock;

  out.kmask = Tensor::zeros(T, n + 1);
  for (std::size_t j = 0; j < n; ++j)
    if (input.triples[j].is_hol)
      for (std::size_t t = 0; t < T; ++t) out.kmask.at(t, j) = kBlock;
  if (no_repeat)
    for (std::size_t t = 1; t < T; ++t)
      for (std::size_t u = 0; u < t && u < prefix_triples.size(); ++u)
        if (prefix_triples[u] < n) out.kmask.at(t, prefix_triples[u]) = kBlock;
  if (block_stop_knowledge)
    for (std::size_t t = 0; t < T; ++t) out.kmask.at(t, n) = kBlock;

  out.elog = ops::log_softmax(scores_e, out.emask);
  out.edist = ops::masked_softmax(scores_e, out.emask);
  out.klog = ops::log_softmax(scores_k, out.kmask);
  out.kdist = ops::masked_softmax(scores_k, out.kmask);
  return out;
}

}  // namespace

std::size_t argmax_row(const Tensor& t, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < t.cols(); ++j)
    if (t.at(row, j) > t.at(row, best)) best = j;
  return best;
}

DecodeContext make_decode_context(const StructuredInput& input, const Vocab& vocab,
                                  ParamRegistry& params, const ModelConfig& config) {
  Tape tape;
  const DropoutCtx no_drop;
  Var emb = embed_triples(tape, input, vocab, params, config, no_drop);
  EncodeOut enc = encode(tape, emb, input, params, config, no_drop);
  DecodeContext ctx;
  ctx.input = &input;
  ctx.params = &params;
  ctx.config = &config;
  ctx.H = tape.value(enc.H);
  ctx.He = tape.value(enc.He);
  return ctx;
}

StepDists step_distributions(const DecodeContext& ctx, const DecodeState& state,
                             bool no_repeat, bool block_stop_entity,
                             bool block_stop_knowledge) {
  Tape tape;
  const DropoutCtx no_drop;
  Var H = tape.constant(ctx.H);
  Var He = tape.constant(ctx.He);
  PassOut pass = run_pass(tape, H, He, *ctx.input, *ctx.params, *ctx.config, no_drop,
                          state.entities, state.triples, no_repeat, block_stop_entity,
                          block_stop_knowledge);
  const std::size_t last = state.step();
  StepDists d;
  d.entity_dist = row_of(tape.value(pass.edist), last);
  d.entity_log = row_of(tape.value(pass.elog), last);
  d.knowledge_dist = row_of(tape.value(pass.kdist), last);
  d.knowledge_log = row_of(tape.value(pass.klog), last);
  return d;
}

Plan decode_greedy(const DecodeContext& ctx, std::size_t max_len, bool no_repeat,
                   double* out_log_prob) {
  const std::size_t n = ctx.input->n_total();
  DecodeState st;
  bool terminated = false;
  for (std::size_t t = 0; t < max_len; ++t) {
    const StepDists d = step_distributions(ctx, st, no_repeat);
    const std::size_t ae = argmax_row(d.entity_log, 0);
    const std::size_t ak = argmax_row(d.knowledge_log, 0);
    st.log_prob += d.entity_log.at(0, ae);
    st.log_prob += d.knowledge_log.at(0, ak);
    st.entities.push_back(ae);
    st.triples.push_back(ak);
    if (ak == n) {
      terminated = true;
      break;
    }
  }
  Plan plan;
  plan.terminated = terminated;
  for (std::size_t i = 0; i < st.triples.size(); ++i)
    if (st.triples[i] < n) plan.steps.push_back(PlanStep{st.entities[i], st.triples[i]});
  if (out_log_prob != nullptr) *out_log_prob = st.log_prob;
  return plan;
}

namespace {

struct Finished {
  DecodeState st;
  bool terminated = false;
};

bool state_less(const DecodeState& a, const DecodeState& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.entities != b.entities) return a.entities < b.entities;
  return a.triples < b.triples;
}

}  // namespace

Plan decode_beam(const DecodeContext& ctx, std::size_t beam, std::size_t max_len,
                 bool no_repeat, double* out_log_prob) {
  if (beam < 1) throw ValidationError("beam must be >= 1");
  const std::size_t p = ctx.input->n_entities();
  const std::size_t n = ctx.input->n_total();

  std::vector<DecodeState> active{DecodeState{}};
  std::vector<Finished> finished;

  for (std::size_t t = 0; t < max_len && !active.empty(); ++t) {
    std::vector<DecodeState> expanded;
    for (const DecodeState& st : active) {
      const StepDists d = step_distributions(ctx, st, no_repeat);
      for (std::size_t i = 0; i <= p; ++i) {
        const double le = d.entity_log.at(0, i);
        if (le <= kBlockThreshold) continue;
        for (std::size_t j = 0; j <= n; ++j) {
          const double lk = d.knowledge_log.at(0, j);
          if (lk <= kBlockThreshold) continue;
          DecodeState next = st;
          next.log_prob += le;
          next.log_prob += lk;
          next.entities.push_back(i);
          next.triples.push_back(j);
          expanded.push_back(std::move(next));
        }
      }
    }
    // stop expansions compete for beam slots; only survivors finish
    std::sort(expanded.begin(), expanded.end(), state_less);
    if (expanded.size() > beam) expanded.resize(beam);
    active.clear();
    for (DecodeState& st : expanded) {
      if (st.triples.back() == n)
        finished.push_back(Finished{std::move(st), true});
      else
        active.push_back(std::move(st));
    }
  }
  for (DecodeState& st : active) finished.push_back(Finished{std::move(st), false});

  // The greedy rollout always competes, so the returned hypothesis never
  // scores below it.
  {
    DecodeState greedy;
    Plan g = decode_greedy(ctx, max_len, no_repeat, &greedy.log_prob);
    for (const PlanStep& s : g.steps) {
      greedy.entities.push_back(s.entity_id);
      greedy.triples.push_back(s.triple_index);
    }
    if (g.terminated) {
      // greedy's trailing stop step was scored but not recorded as a step
      greedy.entities.push_back(p);
      greedy.triples.push_back(n);
    }
    // the recorded stop entity is the greedy argmax, not necessarily p; the
    // sequences are only used for deterministic tie-breaking here
    finished.push_back(Finished{std::move(greedy), g.terminated});
  }

  const Finished* best = nullptr;
  for (const Finished& f : finished)
    if (best == nullptr || state_less(f.st, best->st)) best = &f;

  Plan plan;
  plan.terminated = best->terminated;
  for (std::size_t i = 0; i < best->st.triples.size(); ++i)
    if (best->st.triples[i] < n)
      plan.steps.push_back(PlanStep{best->st.entities[i], best->st.triples[i]});
  if (out_log_prob != nullptr) *out_log_prob = best->st.log_prob;
  return plan;
}

TeacherForced teacher_forced(Tape& tape, const Example& example, const Vocab& vocab,
                             ParamRegistry& params, const ModelConfig& config,
                             const DropoutCtx& drop) {
  if (!example.gold_plan)
    throw TrainingSetupError("example " + example.id + " has no gold plan");
  const StructuredInput& input = example.input;
  const std::size_t p = input.n_entities();
  const std::size_t n = input.n_total();

  std::vector<std::size_t> gold_e, gold_k;
  for (const PlanStep& s : example.gold_plan->steps) {
    gold_e.push_back(s.entity_id);
    gold_k.push_back(s.triple_index);
  }

  Var emb = embed_triples(tape, input, vocab, params, config, drop);
  EncodeOut enc = encode(tape, emb, input, params, config, drop);
  PassOut pass = run_pass(tape, enc.H, enc.He, input, params, config, drop, gold_e, gold_k,
                          config.no_repeat, false, false);

  TeacherForced out;
  out.elog = pass.elog;
  out.klog = pass.klog;
  out.e_targets = gold_e;
  out.e_targets.push_back(p);
  out.k_targets = gold_k;
  out.k_targets.push_back(n);

  const std::size_t T = out.k_targets.size();
  for (std::size_t t = 0; t < T; ++t) {
    if (pass.kmask.at(t, out.k_targets[t]) <= kBlockThreshold)
      throw TrainingSetupError("example " + example.id + ": gold triple " +
                               std::to_string(out.k_targets[t]) + " is masked at step " +
                               std::to_string(t));
    if (pass.emask.at(t, out.e_targets[t]) <= kBlockThreshold)
      throw TrainingSetupError("example " + example.id + ": gold entity " +
                               std::to_string(out.e_targets[t]) + " is masked at step " +
                               std::to_string(t));
  }

  const Tensor& ev = tape.value(pass.elog);
  const Tensor& kv = tape.value(pass.klog);
  for (std::size_t t = 0; t < T; ++t) {
    out.e_argmax.push_back(argmax_row(ev, t));
    out.k_argmax.push_back(argmax_row(kv, t));
  }
  return out;
}

void save_plan_file(const std::string& path, const std::vector<PlannedExample>& plans,
                    const std::vector<const StructuredInput*>& inputs) {
  if (plans.size() != inputs.size())
    throw DimensionError("plan/input count mismatch in save_plan_file");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write plan file: " + path);
  for (std::size_t i = 0; i < plans.size(); ++i) {
    Json rec;
    rec["id"] = plans[i].id;
    Json steps = Json::array();
    for (const PlanStep& s : plans[i].plan.steps)
      steps.push_back(Json::array({s.entity_id, mem_to_file_index(*inputs[i], s.triple_index)}));
    rec["steps"] = steps;
    rec["terminated"] = plans[i].plan.terminated;
    rec["log_prob"] = plans[i].log_prob;
    out << rec.dump() << "\n";
  }
}

std::vector<PlannedExample> load_plan_file(const std::string& path,
                                           const std::vector<Example>& corpus) {
  std::map<std::string, const Example*> by_id;
  for (const Example& ex : corpus) by_id[ex.id] = &ex;
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open plan file: " + path);
  std::vector<PlannedExample> out;
  std::map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json rec;
    try {
      rec = Json::parse(line);
      PlannedExample pe;
      pe.id = rec.at("id").get<std::string>();
      auto it = by_id.find(pe.id);
      if (it == by_id.end())
        throw ValidationError("plan line " + std::to_string(line_no) + ": unknown example id " +
                              pe.id);
      if (seen[pe.id])
        throw ValidationError("plan line " + std::to_string(line_no) + ": duplicate plan for " +
                              pe.id);
      seen[pe.id] = true;
      for (const auto& step : rec.at("steps")) {
        PlanStep s;
        s.entity_id = step[0].get<std::size_t>();
        s.triple_index = file_to_mem_index(it->second->input, step[1].get<std::size_t>());
        pe.plan.steps.push_back(s);
      }
      if (rec.contains("terminated")) pe.plan.terminated = rec.at("terminated").get<bool>();
      if (rec.contains("log_prob")) pe.log_prob = rec.at("log_prob").get<double>();
      out.push_back(std::move(pe));
    } catch (const Json::exception& e) {
      throw ParseError("plan line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace skh
