#include "skh/schema.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "skh/common.hpp"
#include "skh/text.hpp"

namespace skh {

namespace {
using Json = nlohmann::ordered_json;
}

std::size_t file_to_mem_index(const StructuredInput& input, std::size_t file_index) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < input.triples.size(); ++i) {
    if (input.triples[i].is_hol) continue;
    if (seen == file_index) return i;
    ++seen;
  }
  throw ValidationError("triple index " + std::to_string(file_index) + " out of range (" +
                        std::to_string(seen) + " real triples)");
}

std::size_t mem_to_file_index(const StructuredInput& input, std::size_t mem_index) {
  if (mem_index >= input.triples.size() || input.triples[mem_index].is_hol)
    throw ValidationError("triple index " + std::to_string(mem_index) +
                          " is not a real triple");
  std::size_t seen = 0;
  for (std::size_t i = 0; i < mem_index; ++i)
    if (!input.triples[i].is_hol) ++seen;
  return seen;
}

void validate_input(const StructuredInput& input, const std::string& id) {
  const std::size_t p = input.entities.size();
  for (std::size_t i = 0; i < p; ++i) {
    if (input.entities[i].id != i)
      throw ValidationError("example " + id + ": entity ids not dense at " + std::to_string(i));
    if (input.entities[i].name.empty())
      throw ValidationError("example " + id + ": entity " + std::to_string(i) + " has no name");
  }
  std::size_t expected_entity = 0;
  bool block_open = false;
  std::vector<std::size_t> hol_count(p, 0);
  for (std::size_t i = 0; i < input.triples.size(); ++i) {
    const KnowledgeTriple& t = input.triples[i];
    if (t.entity_id >= p)
      throw ValidationError("example " + id + ": triple " + std::to_string(i) +
                            " has entity_id " + std::to_string(t.entity_id) + " out of range");
    if (!block_open || t.entity_id != expected_entity) {
      // block boundary: entity ids must be non-decreasing and start with HOL
      if (block_open && t.entity_id < expected_entity)
        throw ValidationError("example " + id + ": entity blocks not contiguous at triple " +
                              std::to_string(i));
      expected_entity = t.entity_id;
      block_open = true;
      if (!t.is_hol)
        throw ValidationError("example " + id + ": entity " + std::to_string(t.entity_id) +
                              " block does not start with a sentinel");
    }
    if (t.is_hol) {
      ++hol_count[t.entity_id];
      if (t.attribute != kHolAttr || !t.value.empty())
        throw ValidationError("example " + id + ": malformed sentinel at triple " +
                              std::to_string(i));
    } else if (t.value_kind == ValueKind::kNumber && !parse_number(t.value)) {
      throw ValidationError("example " + id + ": triple " + std::to_string(i) + " value '" +
                            t.value + "' is not a finite number");
    }
  }
  for (std::size_t e = 0; e < p; ++e)
    if (hol_count[e] != 1)
      throw ValidationError("example " + id + ": entity " + std::to_string(e) + " has " +
                            std::to_string(hol_count[e]) + " sentinels");
}

namespace {

Example parse_record(const Json& rec, CorpusMode mode, std::size_t line_no) {
  Example ex;
  try {
    ex.id = rec.at("id").get<std::string>();
    if (ex.id.empty()) throw ParseError("empty id");
    if (rec.contains("context")) {
      for (const auto& u : rec.at("context")) ex.input.context.push_back(u.get<std::string>());
    }
    if (mode == CorpusMode::kDialogue && !rec.contains("context"))
      throw ParseError("dialogue record without context");
    std::size_t eid = 0;
    for (const auto& ent : rec.at("entities")) {
      Entity e;
      e.id = eid;
      e.name = ent.at("name").get<std::string>();
      ex.input.entities.push_back(e);
      KnowledgeTriple hol;
      hol.entity_id = eid;
      hol.attribute = kHolAttr;
      hol.is_hol = true;
      ex.input.triples.push_back(hol);
      for (const auto& tr : ent.at("triples")) {
        KnowledgeTriple t;
        t.entity_id = eid;
        t.attribute = tr.at("attr").get<std::string>();
        t.value = tr.at("value").get<std::string>();
        const std::string kind = tr.at("kind").get<std::string>();
        if (kind == "number")
          t.value_kind = ValueKind::kNumber;
        else if (kind == "text")
          t.value_kind = ValueKind::kText;
        else
          throw ParseError("unknown value kind '" + kind + "'");
        ex.input.triples.push_back(t);
      }
      ++eid;
    }
    if (rec.contains("reference")) ex.reference_text = rec.at("reference").get<std::string>();
    if (rec.contains("gold_plan")) {
      Plan plan;
      for (const auto& step : rec.at("gold_plan")) {
        if (!step.is_array() || step.size() != 2) throw ParseError("gold_plan step not a pair");
        PlanStep s;
        s.entity_id = step[0].get<std::size_t>();
        const std::size_t file_idx = step[1].get<std::size_t>();
        try {
          s.triple_index = file_to_mem_index(ex.input, file_idx);
        } catch (const ValidationError& e) {
          throw ValidationError("example " + ex.id + ": " + e.what());
        }
        plan.steps.push_back(s);
      }
      ex.gold_plan = plan;
    }
  } catch (const Json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return ex;
}

}  // namespace

std::vector<Example> load_corpus(const std::string& path, CorpusMode mode) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file: " + path);
  std::vector<Example> corpus;
  std::map<std::string, bool> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    Example ex = parse_record(rec, mode, line_no);
    validate_input(ex.input, ex.id);
    if (seen_ids[ex.id])
      throw ValidationError("example " + ex.id + ": duplicate id");
    seen_ids[ex.id] = true;
    if (ex.gold_plan) {
      for (const PlanStep& s : ex.gold_plan->steps) {
        if (s.triple_index >= ex.input.triples.size() ||
            ex.input.triples[s.triple_index].is_hol)
          throw ValidationError("example " + ex.id + ": gold plan points at a sentinel");
        if (ex.input.triples[s.triple_index].entity_id != s.entity_id)
          throw ValidationError("example " + ex.id +
                                ": gold plan entity does not own the triple");
      }
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

void save_corpus(const std::string& path, const std::vector<Example>& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open corpus file for writing: " + path);
  for (const Example& ex : corpus) {
    Json rec;
    rec["id"] = ex.id;
    if (!ex.input.context.empty()) rec["context"] = ex.input.context;
    Json entities = Json::array();
    for (const Entity& e : ex.input.entities) {
      Json ent;
      ent["name"] = e.name;
      Json triples = Json::array();
      for (const KnowledgeTriple& t : ex.input.triples) {
        if (t.entity_id != e.id || t.is_hol) continue;
        Json tr;
        tr["attr"] = t.attribute;
        tr["value"] = t.value;
        tr["kind"] = t.value_kind == ValueKind::kNumber ? "number" : "text";
        triples.push_back(tr);
      }
      ent["triples"] = triples;
      entities.push_back(ent);
    }
    rec["entities"] = entities;
    if (ex.gold_plan) {
      Json plan = Json::array();
      for (const PlanStep& s : ex.gold_plan->steps)
        plan.push_back(Json::array({s.entity_id, mem_to_file_index(ex.input, s.triple_index)}));
      rec["gold_plan"] = plan;
    }
    if (ex.reference_text) rec["reference"] = *ex.reference_text;
    out << rec.dump() << "\n";
  }
}

namespace {

// Candidate value occurrence in the reference token stream.
struct Occurrence {
  std::size_t pos;
  std::size_t triple_index;
};

bool name_in_window(const std::vector<std::string>& ref_tokens, const std::string& name,
                    std::size_t pos, std::size_t* out_dist) {
  const std::vector<std::string> name_tokens = tokenize(name);
  if (name_tokens.empty()) return false;
  const std::size_t lo = pos >= 10 ? pos - 10 : 0;
  const std::size_t hi = std::min(ref_tokens.size(), pos + 10 + 1);
  std::size_t best = std::string::npos;
  for (std::size_t s = lo; s + name_tokens.size() <= hi; ++s) {
    bool match = true;
    for (std::size_t k = 0; k < name_tokens.size(); ++k)
      if (ref_tokens[s + k] != name_tokens[k]) {
        match = false;
        break;
      }
    if (!match) continue;
    // preceding mentions win over following ones, nearer wins within a side
    const std::size_t dist = s <= pos ? pos - s : (s - pos) + 1000;
    best = std::min(best, dist);
  }
  if (best == std::string::npos) return false;
  *out_dist = best;
  return true;
}

}  // namespace

Plan label_gold_plan_lcs(const std::string& reference_text, const StructuredInput& input) {
  const std::vector<std::string> ref = tokenize(reference_text);
  Plan plan;
  if (ref.empty()) return plan;

  // First-match candidates per triple: numbers need an exact token hit at
  // every occurrence position; text needs 0.8 LCS token coverage and lands
  // at its leftmost alignment position.
  std::vector<std::vector<std::size_t>> positions(input.triples.size());
  for (std::size_t i = 0; i < input.triples.size(); ++i) {
    const KnowledgeTriple& t = input.triples[i];
    if (t.is_hol) continue;
    if (t.value_kind == ValueKind::kNumber) {
      const auto v = parse_number(t.value);
      if (!v) continue;
      const std::string canon = canonical_number(*v);
      for (std::size_t p = 0; p < ref.size(); ++p) {
        const auto rv = parse_number(ref[p]);
        if (rv && canonical_number(*rv) == canon) positions[i].push_back(p);
      }
    } else {
      const std::vector<std::string> vt = tokenize(t.value);
      if (vt.empty()) continue;
      const std::size_t need =
          static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(vt.size())));
      if (lcs_length(vt, ref) >= std::max<std::size_t>(need, 1)) {
        const std::size_t pos = lcs_first_match_pos(vt, ref);
        if (pos != std::string::npos) positions[i].push_back(pos);
      }
    }
  }

  // Assign occurrences left to right. At each position the competing
  // unassigned triples are ranked by entity-name proximity in a 10-token
  // window (preceding beats following), then by lowest triple index.
  std::map<std::size_t, std::vector<std::size_t>> by_pos;
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t p : positions[i]) by_pos[p].push_back(i);

  std::vector<bool> assigned(input.triples.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (pos, triple)
  for (const auto& [pos, cands] : by_pos) {
    std::size_t best = std::string::npos;
    std::size_t best_dist = std::string::npos;
    bool best_in_window = false;
    for (std::size_t i : cands) {
      if (assigned[i]) continue;
      std::size_t dist = std::string::npos;
      const bool in_window =
          name_in_window(ref, input.entities[input.triples[i].entity_id].name, pos, &dist);
      const bool wins = best == std::string::npos ||
                        (in_window && !best_in_window) ||
                        (in_window && best_in_window && dist < best_dist);
      if (wins) {
        best = i;
        best_dist = dist;
        best_in_window = in_window;
      }
    }
    if (best != std::string::npos) {
      assigned[best] = true;
      picks.emplace_back(pos, best);
    }
  }

  std::sort(picks.begin(), picks.end());
  for (const auto& [pos, idx] : picks)
    plan.steps.push_back(PlanStep{input.triples[idx].entity_id, idx});
  return plan;
}

}  // namespace skh
