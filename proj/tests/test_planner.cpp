#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "skh/planner.hpp"

using namespace skh;

namespace {

KnowledgeTriple hol_triple(std::size_t e) {
  KnowledgeTriple t;
  t.entity_id = e;
  t.attribute = kHolAttr;
  t.is_hol = true;
  return t;
}

KnowledgeTriple num_triple(std::size_t e, const std::string& a, const std::string& v) {
  KnowledgeTriple t;
  t.entity_id = e;
  t.attribute = a;
  t.value = v;
  t.value_kind = ValueKind::kNumber;
  return t;
}

StructuredInput sized_input(const std::vector<std::size_t>& counts) {
  StructuredInput in;
  for (std::size_t e = 0; e < counts.size(); ++e) {
    in.entities.push_back(Entity{e, "ent" + std::to_string(e)});
    in.triples.push_back(hol_triple(e));
    for (std::size_t i = 0; i < counts[e]; ++i)
      in.triples.push_back(num_triple(e, "a" + std::to_string(i), std::to_string(e * 10 + i)));
  }
  validate_input(in, "sized");
  return in;
}

Model make_model(const StructuredInput& in, ModelConfig cfg) {
  Example ex;
  ex.id = "m";
  ex.input = in;
  Model m{cfg, build_vocab({ex}, cfg.mode, 1), {}};
  add_model_params(m);
  return m;
}

ModelConfig small_config(std::size_t seed) {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.d_emb = 4;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.seed = seed;
  return cfg;
}

double dist_sum(const Tensor& row) {
  double s = 0.0;
  for (double x : row.data) s += x;
  return s;
}

}  // namespace

TEST_CASE("zero pointer vector gives uniform distributions") {
  auto in = sized_input({2, 1});  // p = 2, n = 5
  ModelConfig cfg = small_config(3);
  Model m = make_model(in, cfg);
  for (double& x : m.params.get("plan.e.v").data) x = 0.0;
  for (double& x : m.params.get("plan.k.v").data) x = 0.0;

  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
  StepDists d = step_distributions(ctx, DecodeState{}, true);
  REQUIRE(d.entity_dist.cols() == 3);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(d.entity_dist.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // knowledge stream: HOL columns are blocked, leaving 3 triples + stop
  REQUIRE(d.knowledge_dist.cols() == 6);
  CHECK(d.knowledge_dist.at(0, 0) == 0.0);
  CHECK(d.knowledge_dist.at(0, 3) == 0.0);
  for (std::size_t j : {1u, 2u, 4u, 5u})
    CHECK(d.knowledge_dist.at(0, j) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("single entity with stop blocked gets probability one") {
  auto in = sized_input({2});
  ModelConfig cfg = small_config(4);
  Model m = make_model(in, cfg);
  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
  StepDists d = step_distributions(ctx, DecodeState{}, true, true, false);
  REQUIRE(d.entity_dist.cols() == 2);
  CHECK(d.entity_dist.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.entity_dist.at(0, 1) == 0.0);
}

TEST_CASE("uniform knowledge scores give 1/5 over 4 triples plus stop") {
  auto in = sized_input({4});  // 1 entity, 4 real triples
  ModelConfig cfg = small_config(5);
  Model m = make_model(in, cfg);
  for (double& x : m.params.get("plan.k.v").data) x = 0.0;
  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
  StepDists d = step_distributions(ctx, DecodeState{}, true);
  REQUIRE(d.knowledge_dist.cols() == 6);
  CHECK(d.knowledge_dist.at(0, 0) == 0.0);  // HOL
  for (std::size_t j = 1; j < 6; ++j)
    CHECK(d.knowledge_dist.at(0, j) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("additive pointer scores match the scalar tanh/softmax oracle") {
  Tape t;
  Tensor A = Tensor::zeros(3, 1);
  A.data = {0.3, -0.7, 1.2};
  Tensor B = Tensor::zeros(1, 1);
  B.data = {0.5};
  Tensor v = Tensor::zeros(1, 1);
  v.data = {2.0};
  Var scores = ops::additive_scores(t.constant(A), t.constant(B), t.constant(v));
  const Tensor& sv = t.value(scores);
  CHECK(sv.at(0, 0) == doctest::Approx(1.3280735405356983).epsilon(1e-12));
  CHECK(sv.at(0, 1) == doctest::Approx(-0.39475064044980795).epsilon(1e-12));
  CHECK(sv.at(0, 2) == doctest::Approx(1.8708181412061979).epsilon(1e-12));

  Var probs = ops::masked_softmax(scores, Tensor::zeros(1, 3));
  const Tensor& pv = t.value(probs);
  CHECK(pv.at(0, 0) == doctest::Approx(0.34491271648981919).epsilon(1e-9));
  CHECK(pv.at(0, 1) == doctest::Approx(0.061588009976498763).epsilon(1e-9));
  CHECK(pv.at(0, 2) == doctest::Approx(0.59349927353368204).epsilon(1e-9));
}

TEST_CASE("step distributions sum to one along the whole decode") {
  auto in = sized_input({2, 3});
  ModelConfig cfg = small_config(6);
  Model m = make_model(in, cfg);
  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
  DecodeState st;
  for (std::size_t step = 0; step < 4; ++step) {
    StepDists d = step_distributions(ctx, st, true);
    CHECK(dist_sum(d.entity_dist) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(dist_sum(d.knowledge_dist) == doctest::Approx(1.0).epsilon(1e-9));
    const std::size_t ak = argmax_row(d.knowledge_dist, 0);
    if (ak == in.n_total()) break;
    st.entities.push_back(argmax_row(d.entity_dist, 0));
    st.triples.push_back(ak);
  }
}

TEST_CASE("softmax distributions are invariant to constant score shifts") {
  RngStream rng(17);
  Tape t;
  Tensor S = Tensor::uniform(2, 5, 2.0, rng);
  Tensor mask = Tensor::zeros(2, 5);
  mask.at(0, 3) = kBlock;
  const Tensor P0 = t.value(ops::masked_softmax(t.constant(S), mask));
  Tensor shifted = S;
  for (double& x : shifted.data) x += 7.25;
  const Tensor P1 = t.value(ops::masked_softmax(t.constant(shifted), mask));
  for (std::size_t i = 0; i < P0.numel(); ++i)
    CHECK(P0.data[i] == doctest::Approx(P1.data[i]).epsilon(1e-12));
}

TEST_CASE("knowledge state depends on the chosen entity (lockstep)") {
  auto in = sized_input({2, 2});
  ModelConfig cfg = small_config(7);
  Model m = make_model(in, cfg);
  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);

  DecodeState a;
  a.entities = {0};
  a.triples = {1};
  DecodeState b;
  b.entities = {1};
  b.triples = {1};
  StepDists da = step_distributions(ctx, a, true);
  StepDists db = step_distributions(ctx, b, true);
  double max_diff = 0.0;
  for (std::size_t j = 0; j < da.knowledge_dist.cols(); ++j)
    max_diff = std::max(max_diff,
                        std::abs(da.knowledge_dist.at(0, j) - db.knowledge_dist.at(0, j)));
  CHECK(max_diff > 1e-12);
}

TEST_CASE("no_repeat blocks previously selected triples") {
  auto in = sized_input({3});
  ModelConfig cfg = small_config(8);
  Model m = make_model(in, cfg);
  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);

  DecodeState st;
  st.entities = {0};
  st.triples = {2};
  StepDists masked = step_distributions(ctx, st, true);
  CHECK(masked.knowledge_dist.at(0, 2) < 1e-12);
  StepDists open = step_distributions(ctx, st, false);
  CHECK(open.knowledge_dist.at(0, 2) > 1e-12);
}

TEST_CASE("greedy decoding handles forced stop and unreachable stop") {
  auto in = sized_input({2});
  ModelConfig cfg = small_config(9);
  Model m = make_model(in, cfg);

  // score = sum_d v_d tanh(W_h h + W_k s): zero the state path, route
  // candidates through identity, and saturate the stop row so it wins
  Tensor& Wh = m.params.get("plan.k.W_h");
  for (double& x : Wh.data) x = 0.0;
  for (std::size_t i = 0; i < 8; ++i) Wh.at(i, i) = 1.0;
  for (double& x : m.params.get("plan.k.W_k").data) x = 0.0;
  for (double& x : m.params.get("plan.k.v").data) x = 1.0;
  for (double& x : m.params.get("plan.k.stop").data) x = 5.0;

  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
  double lp = 0.0;
  Plan stop_now = decode_greedy(ctx, 10, true, &lp);
  CHECK(stop_now.steps.empty());
  CHECK(stop_now.terminated);
  CHECK(lp < 0.0);

  // an unreachable stop: its score saturates at the minimum
  for (double& x : m.params.get("plan.k.stop").data) x = -5.0;
  DecodeContext ctx2 = make_decode_context(in, m.vocab, m.params, cfg);
  Plan capped = decode_greedy(ctx2, 2, false);
  CHECK(capped.steps.size() == 2);
  CHECK_FALSE(capped.terminated);
}

TEST_CASE("greedy plans never repeat triples under no_repeat") {
  for (std::size_t seed = 20; seed < 26; ++seed) {
    auto in = sized_input({2, 2, 1});
    ModelConfig cfg = small_config(seed);
    cfg.max_len = 6;
    Model m = make_model(in, cfg);
    DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
    Plan p = decode_greedy(ctx, cfg.effective_max_len(), true);
    std::set<std::size_t> seen;
    for (const PlanStep& s : p.steps) {
      CHECK_FALSE(in.triples[s.triple_index].is_hol);
      CHECK(seen.insert(s.triple_index).second);
    }
  }
}

TEST_CASE("beam of one reproduces greedy exactly on 50 random models") {
  for (std::size_t seed = 100; seed < 150; ++seed) {
    auto in = sized_input({1 + seed % 3, 2});
    ModelConfig cfg = small_config(seed);
    cfg.max_len = 5;
    Model m = make_model(in, cfg);
    DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
    double lg = 0.0, lb = 0.0;
    Plan g = decode_greedy(ctx, cfg.max_len, true, &lg);
    Plan b = decode_beam(ctx, 1, cfg.max_len, true, &lb);
    CHECK(g == b);
    CHECK(lg == lb);
  }
}

TEST_CASE("wider beams never score below greedy") {
  for (std::size_t seed = 200; seed < 212; ++seed) {
    auto in = sized_input({2, 2});
    ModelConfig cfg = small_config(seed);
    cfg.max_len = 5;
    Model m = make_model(in, cfg);
    DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
    double lg = 0.0, lb = 0.0;
    decode_greedy(ctx, cfg.max_len, true, &lg);
    decode_beam(ctx, 5, cfg.max_len, true, &lb);
    CHECK(lb >= lg);
  }
}

TEST_CASE("teacher forcing covers the gold plan plus the stop step") {
  auto in = sized_input({2, 1});
  ModelConfig cfg = small_config(31);
  Model m = make_model(in, cfg);

  Example ex;
  ex.id = "tf";
  ex.input = in;
  Plan gold;
  gold.steps = {PlanStep{0, 1}, PlanStep{0, 2}, PlanStep{1, 4}};
  ex.gold_plan = gold;

  Tape tape;
  const DropoutCtx no_drop;
  TeacherForced tf = teacher_forced(tape, ex, m.vocab, m.params, cfg, no_drop);
  REQUIRE(tf.e_targets.size() == 4);
  REQUIRE(tf.k_targets.size() == 4);
  CHECK(tf.e_targets.back() == in.n_entities());
  CHECK(tf.k_targets.back() == in.n_total());
  CHECK(tape.value(tf.elog).rows() == 4);
  CHECK(tape.value(tf.klog).cols() == in.n_total() + 1);
  CHECK(tf.e_argmax.size() == 4);

  // per-row log-probabilities exponentiate to a distribution
  const Tensor& kl = tape.value(tf.klog);
  for (std::size_t t = 0; t < kl.rows(); ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < kl.cols(); ++j) s += std::exp(kl.at(t, j));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("teacher forcing matches decode-time distributions on the gold prefix") {
  auto in = sized_input({2, 1});
  ModelConfig cfg = small_config(32);
  Model m = make_model(in, cfg);

  Example ex;
  ex.id = "agree";
  ex.input = in;
  Plan gold;
  gold.steps = {PlanStep{0, 2}, PlanStep{1, 4}};
  ex.gold_plan = gold;

  Tape tape;
  const DropoutCtx no_drop;
  TeacherForced tf = teacher_forced(tape, ex, m.vocab, m.params, cfg, no_drop);
  const Tensor kl = tape.value(tf.klog);
  const Tensor el = tape.value(tf.elog);

  DecodeContext ctx = make_decode_context(in, m.vocab, m.params, cfg);
  DecodeState st;
  for (std::size_t t = 0; t < 3; ++t) {
    StepDists d = step_distributions(ctx, st, cfg.no_repeat);
    for (std::size_t j = 0; j < d.knowledge_log.cols(); ++j)
      CHECK(d.knowledge_log.at(0, j) == doctest::Approx(kl.at(t, j)).epsilon(1e-9));
    for (std::size_t j = 0; j < d.entity_log.cols(); ++j)
      CHECK(d.entity_log.at(0, j) == doctest::Approx(el.at(t, j)).epsilon(1e-9));
    if (t < gold.steps.size()) {
      st.entities.push_back(gold.steps[t].entity_id);
      st.triples.push_back(gold.steps[t].triple_index);
    }
  }
}

TEST_CASE("gold plans that repeat a triple are rejected under no_repeat") {
  auto in = sized_input({2});
  ModelConfig cfg = small_config(33);
  Model m = make_model(in, cfg);

  Example ex;
  ex.id = "repeat";
  ex.input = in;
  Plan gold;
  gold.steps = {PlanStep{0, 1}, PlanStep{0, 1}};
  ex.gold_plan = gold;

  Tape tape;
  const DropoutCtx no_drop;
  CHECK_THROWS_AS(teacher_forced(tape, ex, m.vocab, m.params, cfg, no_drop),
                  TrainingSetupError);

  cfg.no_repeat = false;
  Tape tape2;
  TeacherForced tf = teacher_forced(tape2, ex, m.vocab, m.params, cfg, no_drop);
  CHECK(tf.k_targets.size() == 3);
}

TEST_CASE("missing gold plan is a training setup error") {
  auto in = sized_input({1});
  ModelConfig cfg = small_config(34);
  Model m = make_model(in, cfg);
  Example ex;
  ex.id = "nogold";
  ex.input = in;
  Tape tape;
  const DropoutCtx no_drop;
  CHECK_THROWS_AS(teacher_forced(tape, ex, m.vocab, m.params, cfg, no_drop),
                  TrainingSetupError);
}

TEST_CASE("plan files round-trip through save and load") {
  auto in = sized_input({2, 1});
  Example ex;
  ex.id = "ex0";
  ex.input = in;

  PlannedExample pe;
  pe.id = "ex0";
  pe.plan.steps = {PlanStep{0, 1}, PlanStep{2, 4}};  // entity 2 = stop index mid-plan
  pe.plan.terminated = false;
  pe.log_prob = -3.25;

  const std::string path = "/tmp/skh_test_plans.jsonl";
  save_plan_file(path, {pe}, {&in});
  auto loaded = load_plan_file(path, {ex});
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].id == "ex0");
  CHECK(loaded[0].plan == pe.plan);
  CHECK(loaded[0].log_prob == pe.log_prob);
  std::remove(path.c_str());

  // unknown ids are rejected
  save_plan_file(path, {pe}, {&in});
  Example other;
  other.id = "different";
  other.input = in;
  CHECK_THROWS_AS(load_plan_file(path, {other}), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("plan files reject duplicate ids") {
  Example ex;
  ex.id = "e1";
  ex.input.entities = {Entity{0, "A"}, Entity{1, "B"}};
  ex.input.triples = {hol_triple(0), num_triple(0, "x", "1"), hol_triple(1),
                      num_triple(1, "x", "2")};

  const std::string path = "plan_reject.jsonl";
  {
    std::ofstream out(path, std::ios::binary);
    out << "{\"id\":\"e1\",\"steps\":[]}\n{\"id\":\"e1\",\"steps\":[]}\n";
  }
  CHECK_THROWS_AS(load_plan_file(path, {ex}), ValidationError);
  std::remove(path.c_str());
}
