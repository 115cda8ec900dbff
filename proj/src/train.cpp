#include "skh/train.hpp"

#include <cmath>
#include <ostream>

#include <json.hpp>

#include "skh/loss.hpp"
#include "skh/metrics.hpp"
#include "skh/optim.hpp"
#include "skh/planner.hpp"

namespace skh {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5811FF;
constexpr std::uint64_t kDropoutSalt = 0xD2009;

double validation_ks_f1(Model& model, const std::vector<Example>& val_set) {
  ScoreAccumulator acc;
  for (const Example& ex : val_set) {
    if (!ex.gold_plan)
      throw TrainingSetupError("example " + ex.id + ": validation requires a gold plan");
    DecodeContext ctx = make_decode_context(ex.input, model.vocab, model.params, model.config);
    Plan pred = decode_greedy(ctx, model.config.effective_max_len(), model.config.no_repeat);
    acc.add(pred, *ex.gold_plan, ex.input);
  }
  return acc.micro().ks_f1;
}

std::vector<std::vector<double>> snapshot(const ParamRegistry& reg) {
  std::vector<std::vector<double>> out;
  out.reserve(reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) out.push_back(reg.at(i).data);
  return out;
}

void restore(ParamRegistry& reg, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < snap.size(); ++i) reg.at(i).data = snap[i];
}

}  // namespace

TrainResult train_model(Model& model, const std::vector<Example>& train_set,
                        const std::vector<Example>& val_set, std::ostream* trace) {
  const ModelConfig& config = model.config;
  config.validate();
  if (train_set.empty()) throw TrainingSetupError("training set is empty");
  const RngStream root(config.seed);
  RngStream shuffle_rng = root.fork(kShuffleSalt);
  const RngStream drop_root = root.fork(kDropoutSalt);
  std::uint64_t example_counter = 0;

  AdamW opt(config.lr, config.weight_decay);
  TrainResult result;
  std::vector<std::vector<double>> best;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, order.size());
      const double inv = 1.0 / static_cast<double>(hi - lo);
      model.params.zero_grads();
      double sum_total = 0.0, sum_k = 0.0, sum_e = 0.0, sum_m = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const Example& ex = train_set[order[i]];
        RngStream drop_rng = drop_root.fork(example_counter++);
        DropoutCtx drop{config.dropout > 0.0, config.dropout, &drop_rng};
        Tape tape;
        LossParts parts = compute_losses(tape, ex, model.vocab, model.params, config, drop);
        if (!std::isfinite(parts.total))
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(b + 1) + " (example " + ex.id + ")");
        tape.backward(ops::scale(parts.objective, inv));
        sum_total += parts.total;
        sum_k += parts.l_k;
        sum_e += parts.l_e;
        sum_m += parts.l_m;
      }
      const double grad_norm = clip_global_norm(model.params, config.clip_norm);
      opt.step(model.params);
      if (!model.params.all_finite())
        throw NumericError("non-finite parameter after epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(b + 1));
      epoch_loss += sum_total;
      if (trace) {
        nlohmann::ordered_json line;
        line["event"] = "batch";
        line["epoch"] = epoch;
        line["batch"] = b + 1;
        line["loss"] = sum_total * inv;
        line["l_k"] = sum_k * inv;
        line["l_e"] = sum_e * inv;
        line["l_m"] = sum_m * inv;
        line["grad_norm"] = grad_norm;
        (*trace) << line.dump() << "\n";
      }
    }
    epoch_loss /= static_cast<double>(train_set.size());
    result.train_loss.push_back(epoch_loss);
    double vf1 = 0.0;
    if (!val_set.empty()) {
      vf1 = validation_ks_f1(model, val_set);
      if (best.empty() || vf1 > result.best_val_ks_f1) {
        result.best_val_ks_f1 = vf1;
        result.best_epoch = epoch;
        best = snapshot(model.params);
      }
    }
    result.val_ks_f1.push_back(vf1);
    if (trace) {
      nlohmann::ordered_json line;
      line["event"] = "epoch";
      line["epoch"] = epoch;
      line["train_loss"] = epoch_loss;
      line["val_ks_f1"] = vf1;
      (*trace) << line.dump() << "\n";
    }
  }
  if (!best.empty()) restore(model.params, best);
  result.rng_state = shuffle_rng.state();
  return result;
}

}  // namespace skh
