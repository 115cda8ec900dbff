#include "skh/metrics.hpp"

#include <algorithm>
#include <map>

namespace skh {

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

PRF prf_from_counts(double inter, double n_pred, double n_gold) {
  PRF out;
  if (n_pred == 0.0 && n_gold == 0.0) {
    out.p = out.r = out.f1 = 1.0;
    return out;
  }
  out.p = n_pred > 0.0 ? inter / n_pred : 0.0;
  out.r = n_gold > 0.0 ? inter / n_gold : 0.0;
  out.f1 = f1_of(out.p, out.r);
  return out;
}

double multiset_intersection(const std::vector<TripleKey>& a, const std::vector<TripleKey>& b) {
  std::map<TripleKey, std::size_t> counts;
  for (const TripleKey& k : a) ++counts[k];
  double inter = 0.0;
  for (const TripleKey& k : b) {
    auto it = counts.find(k);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      inter += 1.0;
    }
  }
  return inter;
}

std::pair<double, double> ks_counts(const Plan& pred, const Plan& gold) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> gold_set;
  for (const PlanStep& s : gold.steps) gold_set[{s.entity_id, s.triple_index}] = 1;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pred_set;
  for (const PlanStep& s : pred.steps) pred_set[{s.entity_id, s.triple_index}] = 1;
  double inter = 0.0;
  for (const auto& [key, _] : pred_set) inter += gold_set.count(key) ? 1.0 : 0.0;
  return {inter, static_cast<double>(pred_set.size())};
}

std::size_t gold_set_size(const Plan& gold) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> s;
  for (const PlanStep& st : gold.steps) s[{st.entity_id, st.triple_index}] = 1;
  return s.size();
}

}  // namespace

TripleKey triple_key(const StructuredInput& input, std::size_t mem_index) {
  const KnowledgeTriple& t = input.triples.at(mem_index);
  return TripleKey{input.entities.at(t.entity_id).name, t.attribute, t.value};
}

std::vector<TripleKey> plan_keys(const Plan& plan, const StructuredInput& input) {
  std::vector<TripleKey> keys;
  keys.reserve(plan.steps.size());
  for (const PlanStep& s : plan.steps) keys.push_back(triple_key(input, s.triple_index));
  return keys;
}

PRF content_selection(const std::vector<TripleKey>& pred, const std::vector<TripleKey>& gold) {
  return prf_from_counts(multiset_intersection(pred, gold), static_cast<double>(pred.size()),
                         static_cast<double>(gold.size()));
}

std::size_t dl_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t m = a.size(), n = b.size();
  const std::size_t inf = m + n;
  // (m+2) x (n+2) with a sentinel border
  std::vector<std::size_t> d((m + 2) * (n + 2), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (n + 2) + j]; };
  at(0, 0) = inf;
  for (std::size_t i = 0; i <= m; ++i) {
    at(i + 1, 0) = inf;
    at(i + 1, 1) = i;
  }
  for (std::size_t j = 0; j <= n; ++j) {
    at(0, j + 1) = inf;
    at(1, j + 1) = j;
  }
  // alphabets here are tiny, so a flat scan beats a map
  std::vector<std::pair<int, std::size_t>> last_row;
  auto row_of = [&](int c) -> std::size_t& {
    for (auto& [sym, row] : last_row)
      if (sym == c) return row;
    last_row.emplace_back(c, 0);
    return last_row.back().second;
  };
  for (std::size_t i = 1; i <= m; ++i) {
    std::size_t last_col = 0;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t k = row_of(b[j - 1]);
      const std::size_t l = last_col;
      std::size_t cost = 1;
      if (a[i - 1] == b[j - 1]) {
        cost = 0;
        last_col = j;
      }
      const std::size_t sub = at(i, j) + cost;
      const std::size_t ins = at(i + 1, j) + 1;
      const std::size_t del = at(i, j + 1) + 1;
      const std::size_t tra = at(k, l) + (i - k - 1) + 1 + (j - l - 1);
      at(i + 1, j + 1) = std::min(std::min(sub, ins), std::min(del, tra));
    }
    row_of(a[i - 1]) = i;
  }
  return at(m + 1, n + 1);
}

COScore content_ordering(const std::vector<TripleKey>& pred,
                         const std::vector<TripleKey>& gold) {
  COScore out;
  const std::size_t longest = std::max(pred.size(), gold.size());
  if (longest == 0) return out;  // distance 0, co 1
  std::map<TripleKey, int> ids;
  auto encode = [&](const std::vector<TripleKey>& keys) {
    std::vector<int> v;
    v.reserve(keys.size());
    for (const TripleKey& k : keys) {
      auto it = ids.find(k);
      if (it == ids.end()) it = ids.emplace(k, static_cast<int>(ids.size())).first;
      v.push_back(it->second);
    }
    return v;
  };
  const std::vector<int> pa = encode(pred);
  const std::vector<int> ga = encode(gold);
  out.distance = static_cast<double>(dl_distance(pa, ga)) / static_cast<double>(longest);
  out.co = 1.0 - out.distance;
  return out;
}

PRF knowledge_selection(const Plan& pred, const Plan& gold) {
  const auto [inter, n_pred] = ks_counts(pred, gold);
  return prf_from_counts(inter, n_pred, static_cast<double>(gold_set_size(gold)));
}

PlanScore score_plans(const Plan& pred, const Plan& gold, const StructuredInput& input) {
  PlanScore s;
  const auto pk = plan_keys(pred, input);
  const auto gk = plan_keys(gold, input);
  const PRF cs = content_selection(pk, gk);
  s.cs_p = cs.p;
  s.cs_r = cs.r;
  s.cs_f1 = cs.f1;
  const COScore co = content_ordering(pk, gk);
  s.co_dist = co.distance;
  s.co = co.co;
  const PRF ks = knowledge_selection(pred, gold);
  s.ks_p = ks.p;
  s.ks_r = ks.r;
  s.ks_f1 = ks.f1;
  return s;
}

void ScoreAccumulator::add(const Plan& pred, const Plan& gold, const StructuredInput& input) {
  ++n_;
  const auto pk = plan_keys(pred, input);
  const auto gk = plan_keys(gold, input);
  cs_inter_ += multiset_intersection(pk, gk);
  cs_pred_ += static_cast<double>(pk.size());
  cs_gold_ += static_cast<double>(gk.size());
  const auto [inter, n_pred] = ks_counts(pred, gold);
  ks_inter_ += inter;
  ks_pred_ += n_pred;
  ks_gold_ += static_cast<double>(gold_set_size(gold));
  const COScore co = content_ordering(pk, gk);
  co_sum_ += co.co;
  co_dist_sum_ += co.distance;

  const PlanScore one = score_plans(pred, gold, input);
  macro_sum_.cs_p += one.cs_p;
  macro_sum_.cs_r += one.cs_r;
  macro_sum_.cs_f1 += one.cs_f1;
  macro_sum_.co += one.co;
  macro_sum_.co_dist += one.co_dist;
  macro_sum_.ks_p += one.ks_p;
  macro_sum_.ks_r += one.ks_r;
  macro_sum_.ks_f1 += one.ks_f1;
}

PlanScore ScoreAccumulator::micro() const {
  PlanScore s;
  if (n_ == 0) return s;
  const PRF cs = prf_from_counts(cs_inter_, cs_pred_, cs_gold_);
  s.cs_p = cs.p;
  s.cs_r = cs.r;
  s.cs_f1 = cs.f1;
  const PRF ks = prf_from_counts(ks_inter_, ks_pred_, ks_gold_);
  s.ks_p = ks.p;
  s.ks_r = ks.r;
  s.ks_f1 = ks.f1;
  s.co = co_sum_ / static_cast<double>(n_);
  s.co_dist = co_dist_sum_ / static_cast<double>(n_);
  return s;
}

PlanScore ScoreAccumulator::macro() const {
  PlanScore s;
  if (n_ == 0) return s;
  const double inv = 1.0 / static_cast<double>(n_);
  s.cs_p = macro_sum_.cs_p * inv;
  s.cs_r = macro_sum_.cs_r * inv;
  s.cs_f1 = macro_sum_.cs_f1 * inv;
  s.co = macro_sum_.co * inv;
  s.co_dist = macro_sum_.co_dist * inv;
  s.ks_p = macro_sum_.ks_p * inv;
  s.ks_r = macro_sum_.ks_r * inv;
  s.ks_f1 = macro_sum_.ks_f1 * inv;
  return s;
}

}  // namespace skh
