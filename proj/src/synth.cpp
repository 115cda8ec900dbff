#include "skh/synth.hpp"

#include <algorithm>

namespace skh {

namespace {

const std::vector<std::string>& player_pool() {
  static const std::vector<std::string> pool = {
      "Avery_Bradley",   "Isaiah_Thomas",  "Jae_Crowder",    "Kelly_Olynyk",
      "Marcus_Smart",    "Brook_Lopez",    "Sean_Kilpatrick", "Trevor_Booker",
      "Caris_LeVert",    "Joe_Harris",     "Otto_Porter",     "Markieff_Morris",
      "Bradley_Beal",    "John_Wall",      "Marcin_Gortat",   "Kent_Bazemore",
      "Dennis_Schroder", "Paul_Millsap",   "Tim_Hardaway",    "Dwight_Howard",
      "Evan_Fournier",   "Aaron_Gordon",   "Nikola_Vucevic",  "Elfrid_Payton",
      "Terrence_Ross",   "Jeremy_Lamb",    "Marvin_Williams", "Kemba_Walker",
      "Frank_Kaminsky",  "Cody_Zeller",    "Tobias_Harris",   "Marcus_Morris",
      "Andre_Drummond",  "Reggie_Jackson", "Stanley_Johnson", "Robin_Lopez",
      "Jimmy_Butler",    "Dwyane_Wade",    "Rajon_Rondo",     "Taj_Gibson",
      "Giannis_Antetokounmpo", "Jabari_Parker", "Greg_Monroe", "Malcolm_Brogdon",
      "Tony_Snell",      "Kyle_Korver",    "Kevin_Love",      "Tristan_Thompson",
      "Iman_Shumpert",   "Channing_Frye",
  };
  return pool;
}

const std::vector<std::string>& text_value_pool() {
  static const std::vector<std::string> pool = {
      "Gonzaga",    "Kansas",     "Kentucky",  "Duke",       "Villanova",
      "Arizona",    "UCLA",       "Louisville", "Syracuse",  "Baylor",
      "Oregon",     "Butler",     "Purdue",    "Creighton",  "Xavier",
      "Marquette",  "Cincinnati", "Wichita",   "Florida",    "Virginia",
      "Michigan",   "Wisconsin",  "Indiana",   "Iowa",       "Maryland",
      "Boston",     "Brooklyn",   "Washington", "Atlanta",   "Orlando",
      "Charlotte",  "Detroit",    "Chicago",   "Cleveland",  "Milwaukee",
      "Toronto",    "Miami",      "Memphis",   "Houston",    "Dallas",
      "Denver",     "Phoenix",    "Portland",  "Sacramento", "Minnesota",
      "Oklahoma",   "Utah",       "Antonio",   "Orleans",    "Angeles",
  };
  return pool;
}

struct AttrSpec {
  std::string name;
  ValueKind kind = ValueKind::kNumber;
};

const std::vector<AttrSpec>& filler_attrs() {
  static const std::vector<AttrSpec> fillers = {
      {"assists", ValueKind::kNumber}, {"steals", ValueKind::kNumber},
      {"position", ValueKind::kText},  {"college", ValueKind::kText},
      {"blocks", ValueKind::kNumber},  {"FGA", ValueKind::kNumber},
      {"FTA", ValueKind::kNumber},     {"team", ValueKind::kText},
      {"fouls", ValueKind::kNumber},   {"turnovers", ValueKind::kNumber},
  };
  return fillers;
}

// Slots lead the per-entity block so they take the lowest triple indices;
// "points" joins right after when it is not itself a slot.
std::vector<AttrSpec> attr_list(const SynthConfig& c) {
  std::vector<AttrSpec> attrs;
  for (const std::string& s : c.slots) attrs.push_back({s, ValueKind::kNumber});
  if (std::none_of(attrs.begin(), attrs.end(),
                   [](const AttrSpec& a) { return a.name == "points"; }))
    attrs.push_back({"points", ValueKind::kNumber});
  for (const AttrSpec& f : filler_attrs()) {
    if (attrs.size() >= c.n_attributes) break;
    if (std::any_of(attrs.begin(), attrs.end(),
                    [&](const AttrSpec& a) { return a.name == f.name; }))
      continue;
    attrs.push_back(f);
  }
  return attrs;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_entities < 1 || n_entities > player_pool().size())
    throw ValidationError("n_entities must be in [1, " +
                          std::to_string(player_pool().size()) + "]");
  if (slots.empty()) throw ValidationError("slots must not be empty");
  for (std::size_t i = 0; i < slots.size(); ++i)
    for (std::size_t j = i + 1; j < slots.size(); ++j)
      if (slots[i] == slots[j]) throw ValidationError("duplicate slot '" + slots[i] + "'");
  if (rule == SynthRule::kTopKByScore && k > n_entities)
    throw ValidationError("k must be <= n_entities");
  std::vector<AttrSpec> attrs = attr_list(*this);
  if (attrs.size() > n_attributes)
    throw ValidationError("n_attributes " + std::to_string(n_attributes) +
                          " is below the slot floor of " + std::to_string(attrs.size()));
  if (attrs.size() < n_attributes)
    throw ValidationError("n_attributes " + std::to_string(n_attributes) +
                          " exceeds the available attribute inventory of " +
                          std::to_string(attrs.size()));
  std::size_t numeric = 0;
  for (const AttrSpec& a : attrs)
    if (a.kind == ValueKind::kNumber) ++numeric;
  if (numeric > 41) throw ValidationError("too many numeric attributes for distinct values");
}

std::vector<Example> generate_corpus(const SynthConfig& config) {
  return generate_corpus(config, default_templates());
}

std::vector<Example> generate_corpus(const SynthConfig& config,
                                     const std::vector<Template>& templates) {
  config.validate();
  const std::vector<AttrSpec> attrs = attr_list(config);
  const RngStream root(config.seed);
  std::vector<Example> corpus;
  corpus.reserve(config.n_examples);

  for (std::size_t ex_i = 0; ex_i < config.n_examples; ++ex_i) {
    RngStream rng = root.fork(ex_i);
    Example ex;
    ex.id = "synth-" + std::to_string(ex_i);

    std::vector<std::string> names = player_pool();
    rng.shuffle(names);

    // distinct points across entities keep the selection rule unambiguous
    std::vector<int> point_pool(41);
    for (int v = 0; v <= 40; ++v) point_pool[static_cast<std::size_t>(v)] = v;
    rng.shuffle(point_pool);

    std::vector<double> points(config.n_entities, 0.0);
    std::vector<std::vector<std::size_t>> slot_index(config.n_entities);
    for (std::size_t e = 0; e < config.n_entities; ++e) {
      ex.input.entities.push_back(Entity{e, names[e]});
      KnowledgeTriple hol;
      hol.entity_id = e;
      hol.attribute = kHolAttr;
      hol.is_hol = true;
      ex.input.triples.push_back(hol);

      const int pts = point_pool[e];
      points[e] = pts;
      std::vector<int> others;
      for (int v = 0; v <= 40; ++v)
        if (v != pts) others.push_back(v);
      rng.shuffle(others);
      std::size_t next_other = 0;

      for (std::size_t a = 0; a < attrs.size(); ++a) {
        KnowledgeTriple t;
        t.entity_id = e;
        t.attribute = attrs[a].name;
        t.value_kind = attrs[a].kind;
        if (attrs[a].name == "points")
          t.value = std::to_string(pts);
        else if (attrs[a].kind == ValueKind::kNumber)
          t.value = std::to_string(others[next_other++]);
        else
          t.value = text_value_pool()[rng.below(text_value_pool().size())];
        if (a < config.slots.size()) slot_index[e].push_back(ex.input.triples.size());
        ex.input.triples.push_back(t);
      }
    }
    validate_input(ex.input, ex.id);

    std::vector<std::size_t> ranked(config.n_entities);
    for (std::size_t e = 0; e < ranked.size(); ++e) ranked[e] = e;
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      if (points[a] != points[b]) return points[a] > points[b];
      return a < b;
    });

    std::vector<std::size_t> selected;
    switch (config.rule) {
      case SynthRule::kTopKByScore:
        selected.assign(ranked.begin(), ranked.begin() + static_cast<long>(config.k));
        break;
      case SynthRule::kThreshold:
        for (std::size_t e : ranked)
          if (points[e] >= config.threshold) selected.push_back(e);
        break;
      case SynthRule::kFixedSlots:
        for (std::size_t e = 0; e < config.n_entities; ++e) selected.push_back(e);
        break;
    }

    Plan gold;
    for (std::size_t e : selected)
      for (std::size_t j = 0; j < config.slots.size(); ++j)
        gold.steps.push_back(PlanStep{e, slot_index[e][j]});
    ex.gold_plan = gold;
    ex.reference_text = realize_plan(gold, ex.input, templates);
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace skh
