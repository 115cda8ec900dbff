#include "skh/realize.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace skh {

namespace {

enum class Slot { kLiteral, kValue, kUnit, kAttr, kEntityPoss };

struct PatElem {
  Slot slot = Slot::kLiteral;
  std::string lit;
};

bool is_punct_token(const std::string& t) {
  return t == "." || t == "," || t == "(" || t == ")" || t == ";" || t == ":" || t == "-";
}

std::vector<PatElem> compile_pattern(const std::string& pattern, const std::string& where) {
  std::istringstream ss(pattern);
  std::string piece;
  std::vector<PatElem> out;
  std::size_t values = 0;
  while (ss >> piece) {
    if (piece == "{value}") {
      out.push_back({Slot::kValue, ""});
      ++values;
    } else if (piece == "{unit}") {
      out.push_back({Slot::kUnit, ""});
    } else if (piece == "{attr}") {
      out.push_back({Slot::kAttr, ""});
    } else if (piece == "{entity}'s") {
      out.push_back({Slot::kEntityPoss, ""});
    } else if (piece.find('{') != std::string::npos || piece.find('}') != std::string::npos) {
      throw ParseError(where + ": unknown slot '" + piece + "'");
    } else {
      out.push_back({Slot::kLiteral, piece});
    }
  }
  if (out.empty()) throw ParseError(where + ": empty pattern");
  if (values != 1) throw ParseError(where + ": pattern needs exactly one {value} slot");
  return out;
}

bool realizable(const std::vector<PatElem>& elems) {
  for (const PatElem& e : elems)
    if (e.slot != Slot::kLiteral && e.slot != Slot::kValue) return false;
  return true;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream ss(text);
  std::string chunk;
  std::vector<std::string> out;
  while (ss >> chunk) {
    std::size_t lo = 0;
    while (lo < chunk.size() && chunk[lo] == '(') {
      out.push_back("(");
      ++lo;
    }
    std::size_t hi = chunk.size();
    std::string tail;
    while (hi > lo) {
      const char c = chunk[hi - 1];
      if (c == '.' || c == ',' || c == ')' || c == ';' || c == ':') {
        tail.insert(tail.begin(), c);
        --hi;
      } else {
        break;
      }
    }
    if (hi > lo) out.push_back(chunk.substr(lo, hi - lo));
    for (char c : tail) out.push_back(std::string(1, c));
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (const std::string& t : toks) {
    const bool glue =
        out.empty() || t == "." || t == "," || t == ")" || t == ";" || t == ":" ||
        out.back() == '(';
    if (!glue) out += ' ';
    out += t;
  }
  return out;
}

const Template& fallback_template() {
  static const Template t{"*", "{entity}'s {attr} is {value} .", -1000};
  return t;
}

struct CompiledTemplate {
  const Template* tpl = nullptr;
  std::vector<PatElem> elems;
  bool is_fallback = false;
};

struct MatchBindings {
  std::string value;
  std::string attr;
  long long entity = -1;  // bound by a possessive slot
};

bool match_at(const std::vector<std::string>& toks, std::size_t i, const CompiledTemplate& ct,
              const std::map<std::string, std::size_t>& entity_ids, MatchBindings& out) {
  std::size_t j = i;
  for (const PatElem& e : ct.elems) {
    if (j >= toks.size()) return false;
    const std::string& tok = toks[j];
    switch (e.slot) {
      case Slot::kLiteral:
        if (tok != e.lit) return false;
        break;
      case Slot::kValue:
        if (is_punct_token(tok)) return false;
        out.value = tok;
        break;
      case Slot::kUnit:
        if (is_punct_token(tok)) return false;
        break;
      case Slot::kAttr:
        if (is_punct_token(tok)) return false;
        out.attr = tok;
        break;
      case Slot::kEntityPoss: {
        if (tok.size() < 3 || tok.substr(tok.size() - 2) != "'s") return false;
        auto it = entity_ids.find(tok.substr(0, tok.size() - 2));
        if (it == entity_ids.end()) return false;
        out.entity = static_cast<long long>(it->second);
        break;
      }
    }
    ++j;
  }
  return true;
}

long long resolve_triple(const StructuredInput& input, const std::string& attr,
                         const std::string& value, long long entity) {
  for (std::size_t t = 0; t < input.triples.size(); ++t) {
    const KnowledgeTriple& tr = input.triples[t];
    if (tr.is_hol || tr.attribute != attr || tr.value != value) continue;
    if (entity >= 0 && tr.entity_id != static_cast<std::size_t>(entity)) continue;
    return static_cast<long long>(t);
  }
  return -1;
}

}  // namespace

std::vector<Template> default_templates() {
  return {
      {"points", "{value} points", 100},
      {"rebound", "{value} rebounds", 95},
      {"rebounds", "{value} rebounds", 94},
      {"assists", "{value} assists", 90},
      {"steals", "{value} steals", 89},
      {"blocks", "{value} blocks", 88},
      {"minutes", "{value} minutes", 80},
      {"FGM", "{value} - {unit} FG", 70},
      {"FTM", "{value} - {unit} FT", 69},
      {"3PM", "{value} - {unit} 3PT", 68},
      {"FGA", "{value} FG", 60},
      {"FTA", "{value} FT", 59},
      {"3PA", "{value} 3PT", 58},
  };
}

std::vector<Template> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open template file: " + path);
  std::vector<Template> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
      Template t;
      t.attr = j.at("attr").get<std::string>();
      t.pattern = j.at("pattern").get<std::string>();
      t.priority = j.at("priority").get<int>();
      if (t.attr.empty()) throw ParseError(where + ": empty attr");
      compile_pattern(t.pattern, where);
      out.push_back(std::move(t));
    } catch (const nlohmann::ordered_json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

void save_templates(const std::string& path, const std::vector<Template>& templates) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write template file: " + path);
  for (const Template& t : templates) {
    nlohmann::ordered_json j;
    j["attr"] = t.attr;
    j["pattern"] = t.pattern;
    j["priority"] = t.priority;
    out << j.dump() << "\n";
  }
}

std::string realize_plan(const Plan& plan, const StructuredInput& input,
                         const std::vector<Template>& templates) {
  // best realizable clause per attribute: highest priority, then file order
  std::map<std::string, std::pair<int, std::vector<PatElem>>> clauses;
  for (const Template& t : templates) {
    std::vector<PatElem> elems = compile_pattern(t.pattern, "template '" + t.attr + "'");
    if (!realizable(elems)) continue;
    auto it = clauses.find(t.attr);
    if (it == clauses.end() || t.priority > it->second.first)
      clauses[t.attr] = {t.priority, std::move(elems)};
  }

  auto triple_of = [&](std::size_t step) -> const KnowledgeTriple& {
    const std::size_t idx = plan.steps[step].triple_index;
    if (idx >= input.n_total())
      throw ValidationError("plan step " + std::to_string(step) + ": triple index " +
                            std::to_string(idx) + " out of range");
    return input.triples[idx];
  };
  auto emit_clause = [&](std::vector<std::string>& toks, const KnowledgeTriple& tr) {
    for (const PatElem& e : clauses.at(tr.attribute).second)
      toks.push_back(e.slot == Slot::kValue ? tr.value : e.lit);
  };

  std::vector<std::string> toks;
  std::size_t i = 0;
  while (i < plan.steps.size()) {
    const KnowledgeTriple& tr = triple_of(i);
    if (tr.entity_id >= input.n_entities())
      throw ValidationError("plan step " + std::to_string(i) + ": entity out of range");
    const std::string& name = input.entities[tr.entity_id].name;
    if (!clauses.count(tr.attribute)) {
      toks.push_back(name + "'s");
      toks.push_back(tr.attribute);
      toks.push_back("is");
      toks.push_back(tr.value);
      toks.push_back(".");
      ++i;
      continue;
    }
    toks.push_back(name);
    toks.push_back("finished");
    toks.push_back("with");
    emit_clause(toks, tr);
    while (i + 1 < plan.steps.size()) {
      const KnowledgeTriple& next = triple_of(i + 1);
      if (next.entity_id != tr.entity_id || !clauses.count(next.attribute)) break;
      toks.push_back("and");
      emit_clause(toks, next);
      ++i;
    }
    toks.push_back(".");
    ++i;
  }
  return join_tokens(toks);
}

std::vector<std::size_t> extract_triples(const std::string& text, const StructuredInput& input,
                                         const std::vector<Template>& templates) {
  const std::vector<std::string> toks = tokenize(text);
  if (toks.empty()) return {};

  std::vector<CompiledTemplate> trials;
  for (const Template& t : templates)
    trials.push_back({&t, compile_pattern(t.pattern, "template '" + t.attr + "'"), false});
  trials.push_back(
      {&fallback_template(), compile_pattern(fallback_template().pattern, "fallback"), true});
  std::stable_sort(trials.begin(), trials.end(),
                   [](const CompiledTemplate& a, const CompiledTemplate& b) {
                     if (a.elems.size() != b.elems.size()) return a.elems.size() > b.elems.size();
                     return a.tpl->priority > b.tpl->priority;
                   });

  std::map<std::string, std::size_t> entity_ids;
  for (const Entity& e : input.entities)
    if (!entity_ids.count(e.name)) entity_ids[e.name] = e.id;

  std::vector<std::size_t> out;
  long long ctx = -1;
  bool sentence_start = true;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (sentence_start) {
      std::string name = toks[i];
      if (name.size() > 2 && name.substr(name.size() - 2) == "'s")
        name = name.substr(0, name.size() - 2);
      auto it = entity_ids.find(name);
      if (it != entity_ids.end()) ctx = static_cast<long long>(it->second);
    }
    sentence_start = toks[i] == ".";
    for (const CompiledTemplate& ct : trials) {
      MatchBindings b;
      if (!match_at(toks, i, ct, entity_ids, b)) continue;
      const std::string& attr = ct.is_fallback ? b.attr : ct.tpl->attr;
      const long long entity = b.entity >= 0 ? b.entity : ctx;
      const long long t = resolve_triple(input, attr, b.value, entity);
      if (t < 0) continue;
      out.push_back(static_cast<std::size_t>(t));
      break;
    }
  }

  if (out.empty()) {
    const Plan labeled = label_gold_plan_lcs(text, input);
    for (const PlanStep& st : labeled.steps) out.push_back(st.triple_index);
  }
  return out;
}

}  // namespace skh
