// Seeded synthetic box-score corpus. Each example is a small table of
// entities with numeric and text attributes; the gold plan comes from a
// deterministic selection rule and the reference text is the realized gold
// plan, so labeling the reference recovers the plan exactly.

#ifndef SKH_SYNTH_HPP
#define SKH_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "skh/realize.hpp"
#include "skh/schema.hpp"

namespace skh {

enum class SynthRule { kTopKByScore, kThreshold, kFixedSlots };

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_examples = 200;
  std::size_t n_entities = 6;
  std::size_t n_attributes = 8;  // per entity, slots first, then fillers
  SynthRule rule = SynthRule::kTopKByScore;
  std::size_t k = 2;
  double threshold = 21.0;
  std::vector<std::string> slots = {"points", "rebounds", "minutes"};

  void validate() const;
};

// Entities ranked by their "points" value, descending, ties by entity index.
// top-k takes the first k; threshold keeps everyone at or above the cut;
// fixed slots keeps every entity in table order. Selected entities
// contribute their slot triples in slot order.
std::vector<Example> generate_corpus(const SynthConfig& config);
std::vector<Example> generate_corpus(const SynthConfig& config,
                                     const std::vector<Template>& templates);

}  // namespace skh

#endif  // SKH_SYNTH_HPP
