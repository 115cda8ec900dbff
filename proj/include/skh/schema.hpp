// Domain data model: entities, knowledge triples, plans, examples, and the
// line-delimited corpus format. [HOL] sentinels are injected at load time,
// one per entity at block position 0; files never contain them.

#ifndef SKH_SCHEMA_HPP
#define SKH_SCHEMA_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "skh/common.hpp"

namespace skh {

inline constexpr const char* kHolAttr = "[HOL]";

enum class ValueKind { kNumber, kText };

enum class CorpusMode { kTable, kDialogue };

struct KnowledgeTriple {
  std::size_t entity_id = 0;
  std::string attribute;
  std::string value;
  ValueKind value_kind = ValueKind::kText;
  bool is_hol = false;

  bool operator==(const KnowledgeTriple&) const = default;
};

struct Entity {
  std::size_t id = 0;
  std::string name;

  bool operator==(const Entity&) const = default;
};

struct StructuredInput {
  std::vector<Entity> entities;
  std::vector<KnowledgeTriple> triples;  // contiguous entity blocks, HOL first
  std::vector<std::string> context;      // dialogue mode utterances

  std::size_t n_total() const { return triples.size(); }
  std::size_t n_entities() const { return entities.size(); }

  bool operator==(const StructuredInput&) const = default;
};

struct PlanStep {
  std::size_t entity_id = 0;
  std::size_t triple_index = 0;  // into StructuredInput::triples

  bool operator==(const PlanStep&) const = default;
};

struct Plan {
  std::vector<PlanStep> steps;
  bool terminated = true;  // ended on the stop symbol rather than the cap

  std::size_t size() const { return steps.size(); }
  bool operator==(const Plan&) const = default;
};

struct Example {
  std::string id;
  StructuredInput input;
  std::optional<Plan> gold_plan;
  std::optional<std::string> reference_text;
};

// File-order triple index (sentinels excluded) -> in-memory index, and back.
std::size_t file_to_mem_index(const StructuredInput& input, std::size_t file_index);
std::size_t mem_to_file_index(const StructuredInput& input, std::size_t mem_index);

// Checks all StructuredInput invariants; throws ValidationError naming `id`.
void validate_input(const StructuredInput& input, const std::string& id);

// Line-delimited corpus IO. Sentinels are injected on load and dropped on
// save; gold plan indices are remapped between the two conventions.
std::vector<Example> load_corpus(const std::string& path, CorpusMode mode);
void save_corpus(const std::string& path, const std::vector<Example>& corpus);

// Selects triples whose value tokens are covered by the reference (exact for
// numbers, 0.8 LCS coverage for text) and orders them by first match
// position. Competing triples for one value occurrence are resolved by
// entity-name proximity within a 10-token window, then by lowest index.
Plan label_gold_plan_lcs(const std::string& reference_text, const StructuredInput& input);

}  // namespace skh

#endif  // SKH_SCHEMA_HPP
