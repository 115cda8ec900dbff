// Plan accuracy metrics: content selection (multiset P/R/F1), content
// ordering (1 - normalized Damerau-Levenshtein distance) and knowledge
// selection (set P/R/F1 over (entity, triple) pairs). Micro aggregation sums
// raw counts across examples; macro averages per-example scores.

#ifndef SKH_METRICS_HPP
#define SKH_METRICS_HPP

#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "skh/schema.hpp"

namespace skh {

struct TripleKey {
  std::string entity;
  std::string attribute;
  std::string value;

  bool operator==(const TripleKey&) const = default;
  bool operator<(const TripleKey& o) const {
    return std::tie(entity, attribute, value) < std::tie(o.entity, o.attribute, o.value);
  }
};

TripleKey triple_key(const StructuredInput& input, std::size_t mem_index);
std::vector<TripleKey> plan_keys(const Plan& plan, const StructuredInput& input);

struct PRF {
  double p = 0.0;
  double r = 0.0;
  double f1 = 0.0;
};

PRF content_selection(const std::vector<TripleKey>& pred, const std::vector<TripleKey>& gold);

// Unrestricted Damerau-Levenshtein distance (substitution, insertion,
// deletion and adjacent transposition all cost 1).
std::size_t dl_distance(const std::vector<int>& a, const std::vector<int>& b);

// Normalized distance (by max length; 0 when both empty) and co = 1 - it.
struct COScore {
  double distance = 0.0;
  double co = 1.0;
};

COScore content_ordering(const std::vector<TripleKey>& pred,
                         const std::vector<TripleKey>& gold);

PRF knowledge_selection(const Plan& pred, const Plan& gold);

struct PlanScore {
  double cs_p = 0.0, cs_r = 0.0, cs_f1 = 0.0;
  double co_dist = 0.0, co = 1.0;
  double ks_p = 0.0, ks_r = 0.0, ks_f1 = 0.0;
};

PlanScore score_plans(const Plan& pred, const Plan& gold, const StructuredInput& input);

class ScoreAccumulator {
 public:
  void add(const Plan& pred, const Plan& gold, const StructuredInput& input);
  std::size_t count() const { return n_; }
  PlanScore micro() const;
  PlanScore macro() const;

 private:
  std::size_t n_ = 0;
  double cs_inter_ = 0.0, cs_pred_ = 0.0, cs_gold_ = 0.0;
  double ks_inter_ = 0.0, ks_pred_ = 0.0, ks_gold_ = 0.0;
  double co_sum_ = 0.0, co_dist_sum_ = 0.0;
  PlanScore macro_sum_;
};

}  // namespace skh

#endif  // SKH_METRICS_HPP
