// Command-line driver wiring synthesis, training, decoding, realization and
// evaluation into one binary. Every command is deterministic given its flags;
// logs are JSON lines on stderr, results go to the --out paths. Exit codes:
// 0 success, 1 numeric failure, 2 usage or validation failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skh/checkpoint.hpp"
#include "skh/gradcheck.hpp"
#include "skh/loss.hpp"
#include "skh/metrics.hpp"
#include "skh/model.hpp"
#include "skh/planner.hpp"
#include "skh/realize.hpp"
#include "skh/synth.hpp"
#include "skh/train.hpp"

namespace skh {
namespace {

using Json = nlohmann::ordered_json;

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  static LogLevel lvl = [] {
    const char* env = std::getenv("SKH_LOG_LEVEL");
    if (!env) return LogLevel::kInfo;
    const std::string s(env);
    if (s == "error") return LogLevel::kError;
    if (s == "info") return LogLevel::kInfo;
    if (s == "debug") return LogLevel::kDebug;
    throw ValidationError("SKH_LOG_LEVEL must be error, info or debug, got '" + s + "'");
  }();
  return lvl;
}

void log_json(LogLevel lvl, const char* name, const Json& fields) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  Json rec;
  rec["level"] = name;
  for (const auto& [k, v] : fields.items()) rec[k] = v;
  std::cerr << rec.dump() << "\n";
}

void log_error(const Json& f) { log_json(LogLevel::kError, "error", f); }
void log_info(const Json& f) { log_json(LogLevel::kInfo, "info", f); }
void log_debug(const Json& f) { log_json(LogLevel::kDebug, "debug", f); }

// duplicates everything written to the trace stream onto stderr
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == traits_type::eof()) return c;
    const int ra = a_->sputc(static_cast<char>(c));
    const int rb = b_->sputc(static_cast<char>(c));
    return ra == traits_type::eof() || rb == traits_type::eof() ? traits_type::eof() : c;
  }
  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string(what) + ": '" + s + "' is not a number");
  }
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

struct Overrides {
  std::uint64_t seed = 0;
  std::string mode;
  std::size_t beam = 0;
  std::string no_repeat;
  std::size_t n_fusion = 0;
  std::string loss_weights;
};

void add_decode_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--seed", o.seed, "RNG seed, overrides the config");
  sub->add_option("--mode", o.mode, "corpus mode")->check(CLI::IsMember({"table", "dialogue"}));
  sub->add_option("--beam", o.beam, "beam width, 1 = greedy");
  sub->add_option("--no-repeat", o.no_repeat, "forbid repeated plan steps")
      ->check(CLI::IsMember({"true", "false"}));
}

void add_train_flags(CLI::App* sub, Overrides& o) {
  add_decode_flags(sub, o);
  sub->add_option("--n-fusion", o.n_fusion, "fusion sublayers");
  sub->add_option("--loss-weights", o.loss_weights, "triple,entity,matching loss weights");
}

bool flag_passed(const CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

void apply_overrides(const CLI::App* sub, const Overrides& o, ModelConfig& cfg) {
  if (flag_passed(sub, "--seed")) cfg.seed = o.seed;
  if (flag_passed(sub, "--mode"))
    cfg.mode = o.mode == "table" ? CorpusMode::kTable : CorpusMode::kDialogue;
  if (flag_passed(sub, "--beam")) cfg.beam = o.beam;
  if (flag_passed(sub, "--no-repeat")) cfg.no_repeat = o.no_repeat == "true";
  if (flag_passed(sub, "--n-fusion")) cfg.n_fusion = o.n_fusion;
  if (flag_passed(sub, "--loss-weights")) {
    const std::vector<std::string> parts = split_csv(o.loss_weights);
    if (parts.size() != 3)
      throw ValidationError("--loss-weights expects three comma-separated numbers");
    cfg.w_k = parse_double(parts[0], "--loss-weights");
    cfg.w_e = parse_double(parts[1], "--loss-weights");
    cfg.w_m = parse_double(parts[2], "--loss-weights");
  }
  cfg.validate();
}

std::vector<Template> templates_or_default(const std::string& path) {
  return path.empty() ? default_templates() : load_templates(path);
}

struct SynthArgs {
  std::string out, templates;
  std::string rule = "top_k_by_score";
  std::string slots = "points,rebounds,minutes";
  std::uint64_t seed = 1;
  std::size_t n = 200, entities = 6, attributes = 8, k = 2;
  double threshold = 21.0;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig c;
  c.seed = a.seed;
  c.n_examples = a.n;
  c.n_entities = a.entities;
  c.n_attributes = a.attributes;
  c.k = a.k;
  c.threshold = a.threshold;
  c.slots = split_csv(a.slots);
  if (a.rule == "top_k_by_score")
    c.rule = SynthRule::kTopKByScore;
  else if (a.rule == "threshold")
    c.rule = SynthRule::kThreshold;
  else
    c.rule = SynthRule::kFixedSlots;

  const std::vector<Example> corpus = generate_corpus(c, templates_or_default(a.templates));
  save_corpus(a.out, corpus);
  log_info({{"event", "synth"}, {"examples", corpus.size()}, {"out", a.out}});
  return 0;
}

struct TrainArgs {
  std::string config, data, val_data, out;
  Overrides ov;
  CLI::App* sub = nullptr;
};

int cmd_train(const TrainArgs& a) {
  ModelConfig cfg = a.config.empty() ? ModelConfig{} : load_config_file(a.config);
  apply_overrides(a.sub, a.ov, cfg);

  const std::vector<Example> train_set = load_corpus(a.data, cfg.mode);
  const std::vector<Example> val_set =
      a.val_data.empty() ? std::vector<Example>{} : load_corpus(a.val_data, cfg.mode);

  Model model{cfg, build_vocab(train_set, cfg.mode, cfg.min_exact_count), {}};
  add_model_params(model);

  const std::string trace_path = a.out + ".trace.jsonl";
  std::ofstream trace(trace_path, std::ios::binary);
  if (!trace) throw ParseError("cannot write trace file: " + trace_path);
  log_info({{"event", "train_start"},
            {"train", train_set.size()},
            {"val", val_set.size()},
            {"parameters", model.params.total_elements()},
            {"epochs", cfg.epochs}});

  TrainResult res;
  if (log_level() == LogLevel::kDebug) {
    TeeBuf tee(trace.rdbuf(), std::cerr.rdbuf());
    std::ostream tee_stream(&tee);
    res = train_model(model, train_set, val_set, &tee_stream);
  } else {
    res = train_model(model, train_set, val_set, &trace);
  }

  save_checkpoint(a.out, model, CheckpointExtra{res.rng_state, res.best_val_ks_f1});
  log_info({{"event", "train_done"},
            {"final_train_loss", res.train_loss.empty() ? 0.0 : res.train_loss.back()},
            {"best_val_ks_f1", res.best_val_ks_f1},
            {"best_epoch", res.best_epoch},
            {"checkpoint", a.out},
            {"trace", trace_path}});
  return 0;
}

struct PlanArgs {
  std::string checkpoint, data, out, templates;
  Overrides ov;
  CLI::App* sub = nullptr;
};

std::vector<PlannedExample> decode_corpus(Model& model, const std::vector<Example>& corpus) {
  const ModelConfig& cfg = model.config;
  std::vector<PlannedExample> plans;
  plans.reserve(corpus.size());
  for (const Example& ex : corpus) {
    const DecodeContext ctx =
        make_decode_context(ex.input, model.vocab, model.params, cfg);
    double lp = 0.0;
    Plan p = cfg.beam <= 1
                 ? decode_greedy(ctx, cfg.effective_max_len(), cfg.no_repeat, &lp)
                 : decode_beam(ctx, cfg.beam, cfg.effective_max_len(), cfg.no_repeat, &lp);
    log_debug({{"event", "decode"},
               {"id", ex.id},
               {"steps", p.steps.size()},
               {"log_prob", lp}});
    plans.push_back(PlannedExample{ex.id, std::move(p), lp});
  }
  return plans;
}

int cmd_plan(const PlanArgs& a) {
  Model model = load_checkpoint(a.checkpoint);
  apply_overrides(a.sub, a.ov, model.config);
  const std::vector<Example> corpus = load_corpus(a.data, model.config.mode);
  const std::vector<PlannedExample> plans = decode_corpus(model, corpus);
  std::vector<const StructuredInput*> inputs;
  inputs.reserve(corpus.size());
  for (const Example& ex : corpus) inputs.push_back(&ex.input);
  save_plan_file(a.out, plans, inputs);
  log_info({{"event", "plan"}, {"examples", plans.size()}, {"out", a.out}});
  return 0;
}

int cmd_generate(const PlanArgs& a) {
  Model model = load_checkpoint(a.checkpoint);
  apply_overrides(a.sub, a.ov, model.config);
  const std::vector<Template> templates = templates_or_default(a.templates);
  const std::vector<Example> corpus = load_corpus(a.data, model.config.mode);
  const std::vector<PlannedExample> plans = decode_corpus(model, corpus);

  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw ParseError("cannot write text file: " + a.out);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Json rec;
    rec["id"] = corpus[i].id;
    rec["text"] = realize_plan(plans[i].plan, corpus[i].input, templates);
    out << rec.dump() << "\n";
  }
  log_info({{"event", "generate"}, {"examples", plans.size()}, {"out", a.out}});
  return 0;
}

struct EvalArgs {
  std::string pred, gold, out;
  std::string mode = "table";
};

Json score_fields(const PlanScore& s) {
  Json j;
  j["cs_p"] = s.cs_p;
  j["cs_r"] = s.cs_r;
  j["cs_f1"] = s.cs_f1;
  j["co_dist"] = s.co_dist;
  j["co"] = s.co;
  j["ks_p"] = s.ks_p;
  j["ks_r"] = s.ks_r;
  j["ks_f1"] = s.ks_f1;
  return j;
}

int cmd_eval(const EvalArgs& a) {
  const CorpusMode mode = a.mode == "table" ? CorpusMode::kTable : CorpusMode::kDialogue;
  const std::vector<Example> corpus = load_corpus(a.gold, mode);
  std::map<std::string, const Example*> by_id;
  for (const Example& ex : corpus) by_id[ex.id] = &ex;
  const std::vector<PlannedExample> preds = load_plan_file(a.pred, corpus);
  if (preds.empty()) throw ValidationError("no predictions to score in " + a.pred);

  std::ofstream report;
  if (!a.out.empty()) {
    report.open(a.out, std::ios::binary);
    if (!report) throw ParseError("cannot write report file: " + a.out);
  }

  ScoreAccumulator acc;
  for (const PlannedExample& pe : preds) {
    const Example& ex = *by_id.at(pe.id);
    if (!ex.gold_plan)
      throw ValidationError("example " + ex.id + ": scoring requires a gold plan");
    acc.add(pe.plan, *ex.gold_plan, ex.input);
    if (report.is_open()) {
      Json rec;
      rec["event"] = "example";
      rec["id"] = pe.id;
      const Json scores = score_fields(score_plans(pe.plan, *ex.gold_plan, ex.input));
      for (const auto& [k, v] : scores.items()) rec[k] = v;
      report << rec.dump() << "\n";
    }
  }

  const PlanScore micro = acc.micro();
  const PlanScore macro = acc.macro();
  if (report.is_open()) {
    Json agg;
    agg["event"] = "aggregate";
    agg["examples"] = acc.count();
    agg["micro"] = score_fields(micro);
    agg["macro"] = score_fields(macro);
    report << agg.dump() << "\n";
  }

  std::printf("evaluated %zu examples (micro averages)\n", acc.count());
  std::printf("%8s %8s %8s %8s\n", "", "P", "R", "F1");
  std::printf("%8s %8.4f %8.4f %8.4f\n", "CS", micro.cs_p, micro.cs_r, micro.cs_f1);
  std::printf("%8s %8.4f %8.4f %8.4f\n", "KS", micro.ks_p, micro.ks_r, micro.ks_f1);
  std::printf("%8s %8.4f  (mean normalized edit distance %.4f)\n", "CO", micro.co,
              micro.co_dist);
  log_info({{"event", "eval"},
            {"examples", acc.count()},
            {"micro", score_fields(micro)},
            {"macro", score_fields(macro)}});
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 1;
  double tol = 1e-4;
  double eps = 1e-5;
  std::size_t d_model = 8;
  std::string out;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  SynthConfig sc;
  sc.seed = a.seed;
  sc.n_examples = 1;
  sc.n_entities = 2;
  sc.n_attributes = 3;
  sc.k = 1;
  std::vector<Example> corpus = generate_corpus(sc);

  ModelConfig cfg;
  cfg.d_model = a.d_model;
  cfg.d_emb = a.d_model;
  cfg.dropout = 0.0;
  cfg.seed = a.seed;
  cfg.min_exact_count = 1;
  cfg.validate();

  Model model{cfg, build_vocab(corpus, cfg.mode, cfg.min_exact_count), {}};
  add_model_params(model);

  const Example& ex = corpus[0];
  const Objective f = [&](ParamRegistry& reg, bool with_grad) {
    Tape tape;
    LossParts parts = compute_losses(tape, ex, model.vocab, reg, cfg, DropoutCtx{});
    if (with_grad) tape.backward(parts.objective);
    return tape.value(parts.objective).item();
  };
  const GradCheckReport rep = grad_check(f, model.params, a.eps);

  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw ParseError("cannot write report file: " + a.out);
    for (const GradCheckEntry& e : rep.per_param) {
      Json rec;
      rec["event"] = "param";
      rec["name"] = e.name;
      rec["max_rel_err"] = e.max_rel_err;
      rec["max_abs_err"] = e.max_abs_err;
      out << rec.dump() << "\n";
    }
    Json agg;
    agg["event"] = "summary";
    agg["loss"] = rep.loss;
    agg["max_rel_err"] = rep.max_rel_err;
    agg["tol"] = a.tol;
    out << agg.dump() << "\n";
  }

  const bool pass = rep.max_rel_err < a.tol;
  std::printf("gradcheck: loss %.6f, max relative error %.3e over %zu parameters: %s\n",
              rep.loss, rep.max_rel_err, model.params.size(), pass ? "PASS" : "FAIL");
  if (!pass) {
    log_error({{"event", "gradcheck"}, {"max_rel_err", rep.max_rel_err}, {"tol", a.tol}});
    return 1;
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"structured knowledge planner over entity/attribute tables"};
  app.require_subcommand(1);

  SynthArgs sy;
  CLI::App* synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  synth->add_option("--out", sy.out, "corpus file to write")->required();
  synth->add_option("--seed", sy.seed, "RNG seed");
  synth->add_option("--n", sy.n, "number of examples");
  synth->add_option("--entities", sy.entities, "entities per example");
  synth->add_option("--attributes", sy.attributes, "attributes per entity");
  synth->add_option("--rule", sy.rule, "gold plan selection rule")
      ->check(CLI::IsMember({"top_k_by_score", "threshold", "fixed_slots"}));
  synth->add_option("--k", sy.k, "entities kept by top_k_by_score");
  synth->add_option("--threshold", sy.threshold, "points cut for threshold");
  synth->add_option("--slots", sy.slots, "comma-separated slot attributes");
  synth->add_option("--templates", sy.templates, "template file for references");

  TrainArgs tr;
  CLI::App* train = app.add_subcommand("train", "train a planner on a corpus");
  train->add_option("--config", tr.config, "JSON config file");
  train->add_option("--data", tr.data, "training corpus")->required();
  train->add_option("--val-data", tr.val_data, "validation corpus");
  train->add_option("--out", tr.out, "checkpoint path; trace goes to <out>.trace.jsonl")
      ->required();
  add_train_flags(train, tr.ov);
  tr.sub = train;

  PlanArgs pl;
  CLI::App* plan = app.add_subcommand("plan", "decode plans for a corpus");
  plan->add_option("--checkpoint", pl.checkpoint, "trained model")->required();
  plan->add_option("--data", pl.data, "corpus to plan for")->required();
  plan->add_option("--out", pl.out, "plan file to write")->required();
  add_decode_flags(plan, pl.ov);
  pl.sub = plan;

  PlanArgs ge;
  CLI::App* generate = app.add_subcommand("generate", "decode plans and realize text");
  generate->add_option("--checkpoint", ge.checkpoint, "trained model")->required();
  generate->add_option("--data", ge.data, "corpus to generate for")->required();
  generate->add_option("--out", ge.out, "text file to write")->required();
  generate->add_option("--templates", ge.templates, "template file");
  add_decode_flags(generate, ge.ov);
  ge.sub = generate;

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "score predicted plans against gold");
  eval->add_option("--pred", ev.pred, "predicted plan file")->required();
  eval->add_option("--gold", ev.gold, "gold corpus")->required();
  eval->add_option("--out", ev.out, "per-example report file");
  eval->add_option("--mode", ev.mode, "corpus mode")
      ->check(CLI::IsMember({"table", "dialogue"}));

  GradcheckArgs gc;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--seed", gc.seed, "RNG seed");
  gradcheck->add_option("--tol", gc.tol, "max relative error to pass");
  gradcheck->add_option("--eps", gc.eps, "finite-difference step");
  gradcheck->add_option("--d-model", gc.d_model, "model width");
  gradcheck->add_option("--out", gc.out, "per-parameter report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*synth) return cmd_synth(sy);
  if (*train) return cmd_train(tr);
  if (*plan) return cmd_plan(pl);
  if (*generate) return cmd_generate(ge);
  if (*eval) return cmd_eval(ev);
  return cmd_gradcheck(gc);
}

}  // namespace
}  // namespace skh

int main(int argc, char** argv) {
  try {
    return skh::run(argc, argv);
  } catch (const skh::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const skh::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skh::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skh::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skh::TrainingSetupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
