#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "skh/schema.hpp"
#include "skh/text.hpp"

using namespace skh;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/skh_test_") + name;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

// builds a validated input directly, sentinel rows included
StructuredInput make_input(const std::vector<std::pair<std::string, std::vector<KnowledgeTriple>>>& spec) {
  StructuredInput in;
  for (std::size_t e = 0; e < spec.size(); ++e) {
    in.entities.push_back(Entity{e, spec[e].first});
    KnowledgeTriple hol;
    hol.entity_id = e;
    hol.attribute = kHolAttr;
    hol.is_hol = true;
    in.triples.push_back(hol);
    for (KnowledgeTriple t : spec[e].second) {
      t.entity_id = e;
      t.is_hol = false;
      in.triples.push_back(t);
    }
  }
  validate_input(in, "test");
  return in;
}

KnowledgeTriple num(const std::string& attr, const std::string& value) {
  KnowledgeTriple t;
  t.attribute = attr;
  t.value = value;
  t.value_kind = ValueKind::kNumber;
  return t;
}

KnowledgeTriple txt(const std::string& attr, const std::string& value) {
  KnowledgeTriple t;
  t.attribute = attr;
  t.value = value;
  t.value_kind = ValueKind::kText;
  return t;
}

}  // namespace

TEST_CASE("load_corpus injects sentinels: 2 entities x 2 triples -> 6 triples") {
  const std::string path = temp_path("corpus_2x2.jsonl");
  write_file(path,
             R"({"id":"a","entities":[)"
             R"({"name":"E0","triples":[{"attr":"x","value":"1","kind":"number"},{"attr":"y","value":"2","kind":"number"}]},)"
             R"({"name":"E1","triples":[{"attr":"x","value":"3","kind":"number"},{"attr":"y","value":"4","kind":"number"}]}]})"
             "\n");
  auto corpus = load_corpus(path, CorpusMode::kTable);
  REQUIRE(corpus.size() == 1);
  const StructuredInput& in = corpus[0].input;
  CHECK(in.n_entities() == 2);
  CHECK(in.n_total() == 6);
  CHECK(in.triples[0].is_hol);
  CHECK(in.triples[3].is_hol);
  CHECK(in.triples[1].attribute == "x");
  CHECK(in.triples[4].entity_id == 1);
  int hol_count = 0;
  for (const auto& t : in.triples) hol_count += t.is_hol ? 1 : 0;
  CHECK(hol_count == 2);
  std::remove(path.c_str());
}

TEST_CASE("box score shape: 2 teams + 2 players, 9 attributes each -> 40 triples") {
  std::string rec = R"({"id":"game","entities":[)";
  const char* names[] = {"Nets", "Raptors", "Brook_Lopez", "DeMar_DeRozan"};
  for (int e = 0; e < 4; ++e) {
    if (e) rec += ",";
    rec += std::string(R"({"name":")") + names[e] + R"(","triples":[)";
    for (int a = 0; a < 9; ++a) {
      if (a) rec += ",";
      rec += R"({"attr":"attr)" + std::to_string(a) + R"(","value":")" + std::to_string(e * 9 + a) +
             R"(","kind":"number"})";
    }
    rec += "]}";
  }
  rec += "]}\n";
  const std::string path = temp_path("corpus_box.jsonl");
  write_file(path, rec);
  auto corpus = load_corpus(path, CorpusMode::kTable);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].input.n_entities() == 4);
  CHECK(corpus[0].input.n_total() == 40);
  std::size_t hol = 0;
  for (const auto& t : corpus[0].input.triples) hol += t.is_hol ? 1u : 0u;
  CHECK(hol == 4);
  std::remove(path.c_str());
}

TEST_CASE("gold plan index out of range -> validation error naming the example") {
  const std::string path = temp_path("corpus_badgold.jsonl");
  write_file(path,
             R"({"id":"bad","entities":[{"name":"E","triples":[{"attr":"x","value":"1","kind":"number"}]}],)"
             R"("gold_plan":[[0,1]]})"
             "\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusMode::kTable), ValidationError);
  try {
    load_corpus(path, CorpusMode::kTable);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("malformed record -> parse error with line number") {
  const std::string path = temp_path("corpus_malformed.jsonl");
  write_file(path,
             R"({"id":"ok","entities":[{"name":"E","triples":[{"attr":"x","value":"1","kind":"number"}]}]})"
             "\n{not json\n");
  try {
    load_corpus(path, CorpusMode::kTable);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("duplicate example ids rejected") {
  const std::string path = temp_path("corpus_dup.jsonl");
  const std::string rec =
      R"({"id":"same","entities":[{"name":"E","triples":[{"attr":"x","value":"1","kind":"number"}]}]})";
  write_file(path, rec + "\n" + rec + "\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusMode::kTable), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("dialogue mode requires context") {
  const std::string path = temp_path("corpus_dia.jsonl");
  write_file(path,
             R"({"id":"d","entities":[{"name":"E","triples":[{"attr":"x","value":"hi","kind":"text"}]}]})"
             "\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusMode::kDialogue), ParseError);
  write_file(path,
             R"({"id":"d","context":["hello there"],"entities":[{"name":"E","triples":[{"attr":"x","value":"hi","kind":"text"}]}]})"
             "\n");
  auto corpus = load_corpus(path, CorpusMode::kDialogue);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].input.context.size() == 1);
  std::remove(path.c_str());
}

TEST_CASE("save then load is identity on validated corpora") {
  const std::string path = temp_path("corpus_rt_src.jsonl");
  write_file(path,
             R"({"id":"r1","entities":[)"
             R"({"name":"A","triples":[{"attr":"p","value":"10","kind":"number"},{"attr":"q","value":"blue sky","kind":"text"}]},)"
             R"({"name":"B","triples":[{"attr":"p","value":"7","kind":"number"}]}],)"
             R"("gold_plan":[[0,0],[1,2]],"reference":"A had 10 and B had 7"})"
             "\n"
             R"({"id":"r2","context":["u1","u2"],"entities":[{"name":"C","triples":[{"attr":"z","value":"9","kind":"number"}]}]})"
             "\n");
  auto first = load_corpus(path, CorpusMode::kTable);
  const std::string path2 = temp_path("corpus_rt_dst.jsonl");
  save_corpus(path2, first);
  auto second = load_corpus(path2, CorpusMode::kTable);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].id == second[i].id);
    CHECK(first[i].input == second[i].input);
    CHECK(first[i].gold_plan == second[i].gold_plan);
    CHECK(first[i].reference_text == second[i].reference_text);
  }
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("file/mem triple index mapping") {
  auto in = make_input({{"A", {num("x", "1"), num("y", "2")}}, {"B", {num("x", "3")}}});
  // mem layout: 0 HOL, 1 x, 2 y, 3 HOL, 4 x
  CHECK(file_to_mem_index(in, 0) == 1);
  CHECK(file_to_mem_index(in, 1) == 2);
  CHECK(file_to_mem_index(in, 2) == 4);
  CHECK(mem_to_file_index(in, 1) == 0);
  CHECK(mem_to_file_index(in, 4) == 2);
  CHECK_THROWS_AS(file_to_mem_index(in, 3), ValidationError);
  CHECK_THROWS_AS(mem_to_file_index(in, 0), ValidationError);
}

TEST_CASE("lcs labeling: exact value of one triple only") {
  auto in = make_input({{"A", {num("points", "26"), num("rebounds", "9"), num("assists", "4")}}});
  Plan plan = label_gold_plan_lcs("the total was 9 exactly", in);
  REQUIRE(plan.steps.size() == 1);
  CHECK(plan.steps[0].triple_index == 2);  // rebounds=9 at mem index 2
  CHECK(plan.steps[0].entity_id == 0);
}

TEST_CASE("lcs labeling: reference with no values -> empty plan") {
  auto in = make_input({{"A", {num("points", "26"), txt("position", "center")}}});
  Plan plan = label_gold_plan_lcs("nothing matches here at all", in);
  CHECK(plan.steps.empty());
}

TEST_CASE("lcs labeling: scored 26 points and 9 rebounds") {
  auto in = make_input({{"Brook_Lopez",
                         {num("points", "26"), num("rebound", "9"), num("assists", "2"),
                          num("blocks", "4"), num("minutes", "33")}}});
  Plan plan = label_gold_plan_lcs("Brook_Lopez scored 26 points and 9 rebounds", in);
  REQUIRE(plan.steps.size() == 2);
  CHECK(plan.steps[0].triple_index == 1);  // points=26
  CHECK(plan.steps[1].triple_index == 2);  // rebound=9
  CHECK(plan.steps[0].entity_id == 0);
  CHECK(plan.steps[1].entity_id == 0);
}

TEST_CASE("lcs labeling: text value needs 0.8 token coverage") {
  auto in = make_input({{"A", {txt("summary", "a very long happy phrase here")}}});
  // 4 of 6 tokens = 0.66 coverage, below threshold
  Plan miss = label_gold_plan_lcs("a very long happy day indeed", in);
  CHECK(miss.steps.empty());
  // 5 of 6 tokens = 0.833
  Plan hit = label_gold_plan_lcs("it was a very long happy phrase today", in);
  REQUIRE(hit.steps.size() == 1);
  CHECK(hit.steps[0].triple_index == 1);
}

TEST_CASE("lcs labeling: entity-name window breaks value ties") {
  auto in = make_input({{"Alice", {num("score", "7")}}, {"Bob", {num("score", "7")}}});
  // mem: 0 HOL, 1 Alice score, 2 HOL, 3 Bob score
  Plan p1 = label_gold_plan_lcs("Bob ended with 7", in);
  REQUIRE(p1.steps.size() == 1);
  CHECK(p1.steps[0].triple_index == 3);
  CHECK(p1.steps[0].entity_id == 1);
  Plan p2 = label_gold_plan_lcs("Alice ended with 7", in);
  REQUIRE(p2.steps.size() == 1);
  CHECK(p2.steps[0].triple_index == 1);
  // no name in window: lowest triple index wins
  Plan p3 = label_gold_plan_lcs("the final tally was 7", in);
  REQUIRE(p3.steps.size() == 1);
  CHECK(p3.steps[0].triple_index == 1);
}

TEST_CASE("lcs labeling: order is monotone in first match position") {
  auto in = make_input({{"A", {num("x", "5"), num("y", "12"), num("z", "3")}}});
  Plan plan = label_gold_plan_lcs("first 12 then 3 then 5", in);
  REQUIRE(plan.steps.size() == 3);
  CHECK(plan.steps[0].triple_index == 2);  // y=12
  CHECK(plan.steps[1].triple_index == 3);  // z=3
  CHECK(plan.steps[2].triple_index == 1);  // x=5
}

TEST_CASE("lcs gold plans satisfy entity/triple consistency") {
  auto in = make_input({{"Alpha", {num("a", "11"), txt("b", "red fox")}},
                        {"Beta", {num("a", "22"), txt("b", "blue bird")}}});
  Plan plan = label_gold_plan_lcs("Alpha saw a red fox and Beta counted 22", in);
  for (const PlanStep& s : plan.steps) {
    CHECK(s.entity_id == in.triples[s.triple_index].entity_id);
    CHECK_FALSE(in.triples[s.triple_index].is_hol);
  }
  CHECK(plan.steps.size() == 2);
}

TEST_CASE("numeric values must match exactly, not as substrings") {
  auto in = make_input({{"A", {num("x", "2")}}});
  CHECK(label_gold_plan_lcs("there were 26 items", in).steps.empty());
  CHECK(label_gold_plan_lcs("there were 2 items", in).steps.size() == 1);
}

TEST_CASE("tokenizer splits punctuation and parses numbers") {
  auto toks = tokenize("Lopez scored 26 points, then 9 (nine) rebounds.");
  std::vector<std::string> want = {"Lopez", "scored", "26",   "points", ",",        "then",
                                   "9",     "(",      "nine", ")",      "rebounds", "."};
  CHECK(toks == want);
  CHECK(parse_number("26").has_value());
  CHECK(parse_number("26").value() == doctest::Approx(26.0));
  CHECK_FALSE(parse_number("26a").has_value());
  CHECK(canonical_number(26.0) == "26");
  CHECK(canonical_number(0.5) == "0.5");
}

TEST_CASE("validate_input rejects broken block structure") {
  StructuredInput in;
  in.entities.push_back(Entity{0, "A"});
  KnowledgeTriple t = num("x", "1");
  t.entity_id = 0;
  in.triples.push_back(t);  // no sentinel
  CHECK_THROWS_AS(validate_input(in, "broken"), ValidationError);

  auto ok = make_input({{"A", {num("x", "1")}}});
  ok.triples[1].value = "abc";  // number kind with unparseable value
  CHECK_THROWS_AS(validate_input(ok, "badnum"), ValidationError);
}

