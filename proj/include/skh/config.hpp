// Run configuration shared by training, decoding and the CLI. JSON keys are
// emitted in a fixed order so serialized configs are canonical byte-for-byte.

#ifndef SKH_CONFIG_HPP
#define SKH_CONFIG_HPP

#include <cstdint>
#include <string>

#include <json.hpp>

#include "skh/common.hpp"
#include "skh/schema.hpp"

namespace skh {

struct ModelConfig {
  CorpusMode mode = CorpusMode::kTable;
  std::size_t d_model = 64;
  std::size_t d_emb = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t n_fusion = 1;
  bool shared_fusion = false;
  double dropout = 0.2;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::size_t beam = 5;
  std::size_t max_len = 0;  // 0 = per-mode default
  bool no_repeat = true;
  double w_k = 1.0;
  double w_e = 1.0;
  double w_m = 1.0;
  std::size_t context_cap = 256;
  std::size_t min_exact_count = 5;
  std::string matching_mode = "squared";  // or "indicator"

  std::size_t effective_max_len() const {
    if (max_len > 0) return max_len;
    return mode == CorpusMode::kTable ? 50 : 8;
  }

  void validate() const {
    if (lr <= 0.0) throw ValidationError("lr must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
    if (n_fusion < 1) throw ValidationError("n_fusion must be >= 1");
    if (beam < 1) throw ValidationError("beam must be >= 1");
    if (d_model == 0 || d_model % n_heads != 0)
      throw ValidationError("d_model must be a positive multiple of n_heads");
    if (matching_mode != "squared" && matching_mode != "indicator")
      throw ValidationError("matching_mode must be 'squared' or 'indicator'");
  }
};

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = c.mode == CorpusMode::kTable ? "table" : "dialogue";
  j["d_model"] = c.d_model;
  j["d_emb"] = c.d_emb;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["n_fusion"] = c.n_fusion;
  j["shared_fusion"] = c.shared_fusion;
  j["dropout"] = c.dropout;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["clip_norm"] = c.clip_norm;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["beam"] = c.beam;
  j["max_len"] = c.max_len;
  j["no_repeat"] = c.no_repeat;
  j["w_k"] = c.w_k;
  j["w_e"] = c.w_e;
  j["w_m"] = c.w_m;
  j["context_cap"] = c.context_cap;
  j["min_exact_count"] = c.min_exact_count;
  j["matching_mode"] = c.matching_mode;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  try {
    if (j.contains("mode")) {
      const std::string m = j.at("mode").get<std::string>();
      if (m == "table")
        c.mode = CorpusMode::kTable;
      else if (m == "dialogue")
        c.mode = CorpusMode::kDialogue;
      else
        throw ParseError("unknown mode '" + m + "'");
    }
    auto opt = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("d_model", c.d_model);
    opt("d_emb", c.d_emb);
    opt("n_layers", c.n_layers);
    opt("n_heads", c.n_heads);
    opt("n_fusion", c.n_fusion);
    opt("shared_fusion", c.shared_fusion);
    opt("dropout", c.dropout);
    opt("lr", c.lr);
    opt("weight_decay", c.weight_decay);
    opt("clip_norm", c.clip_norm);
    opt("epochs", c.epochs);
    opt("batch_size", c.batch_size);
    opt("seed", c.seed);
    opt("beam", c.beam);
    opt("max_len", c.max_len);
    opt("no_repeat", c.no_repeat);
    opt("w_k", c.w_k);
    opt("w_e", c.w_e);
    opt("w_m", c.w_m);
    opt("context_cap", c.context_cap);
    opt("min_exact_count", c.min_exact_count);
    opt("matching_mode", c.matching_mode);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError(std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace skh

#endif  // SKH_CONFIG_HPP
