// Template realization of plans into sentences, and the exact inverse:
// extracting triples back out of generated text. A clause template turns one
// triple into a phrase ("26 points"); consecutive steps of one entity join
// into a single "X finished with A and B." sentence. Attributes without a
// clause template fall back to "{entity}'s {attr} is {value}." Extraction
// scans tokens with the same patterns, longest and highest priority first,
// and resolves each match against the input's triples.

#ifndef SKH_REALIZE_HPP
#define SKH_REALIZE_HPP

#include <string>
#include <vector>

#include "skh/schema.hpp"

namespace skh {

// pattern is a space-separated token sequence mixing literals with the slots
// {value}, {unit}, {attr} and {entity}'s. Exactly one {value} per pattern.
// Patterns whose only slot is {value} are used for realization; the rest
// match during extraction only.
struct Template {
  std::string attr;
  std::string pattern;
  int priority = 0;

  bool operator==(const Template&) const = default;
};

// Box-score defaults: counting stats as clauses, shot lines as
// extraction-only pairs (made and attempted).
std::vector<Template> default_templates();

// Line-delimited JSON records {attr, pattern, priority}.
std::vector<Template> load_templates(const std::string& path);
void save_templates(const std::string& path, const std::vector<Template>& templates);

std::string realize_plan(const Plan& plan, const StructuredInput& input,
                         const std::vector<Template>& templates);

// Matched triples in surface order. Text that matches no template at all is
// handed to the LCS labeler instead, so reference prose still yields triples.
std::vector<std::size_t> extract_triples(const std::string& text, const StructuredInput& input,
                                         const std::vector<Template>& templates);

}  // namespace skh

#endif  // SKH_REALIZE_HPP
