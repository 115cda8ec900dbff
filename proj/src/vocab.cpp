#include "skh/vocab.hpp"

#include <fstream>

#include "skh/common.hpp"
#include "skh/text.hpp"

namespace skh {

namespace {
const char* kReserved[] = {"<pad>", "<unk>", "<cls>", "<sep>", "<hol>", "<stop>"};
}

Vocab::Vocab() {
  for (const char* t : kReserved) add(t);
}

std::size_t Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(token);
  ids_[token] = id;
  return id;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const { return ids_.count(token) != 0; }

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size())
    throw ValidationError("token id " + std::to_string(id) + " out of vocab");
  return tokens_[id];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write vocab file: " + path);
  for (const std::string& t : tokens_) out << t << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vocab file: " + path);
  Vocab v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (line_no < 6) {
      if (line != kReserved[line_no])
        throw ParseError("vocab line " + std::to_string(line_no + 1) + " must be '" +
                         kReserved[line_no] + "', got '" + line + "'");
    } else {
      if (line.empty()) throw ParseError("vocab line " + std::to_string(line_no + 1) + " empty");
      const std::size_t before = v.size();
      if (v.add(line) != before)
        throw ParseError("vocab line " + std::to_string(line_no + 1) + " duplicates '" + line +
                         "'");
    }
    ++line_no;
  }
  if (line_no < 6) throw ParseError("vocab file shorter than the reserved block");
  return v;
}

std::string number_bucket_token(double v) {
  if (v < 0.0) return "<num:neg>";
  if (v == 0.0) return "<num:0>";
  if (v < 1.0) return "<num:frac>";
  if (v >= 100.0) return "<num:100+>";
  const int decade = static_cast<int>(v) / 10;
  if (decade == 0) return "<num:1-9>";
  return "<num:" + std::to_string(decade * 10) + "-" + std::to_string(decade * 10 + 9) + ">";
}

std::string exact_number_token(double v) { return "<num=" + canonical_number(v) + ">"; }

std::size_t value_token_id(const Vocab& vocab, const std::string& value, ValueKind kind) {
  if (kind == ValueKind::kNumber) {
    const auto v = parse_number(value);
    if (!v) return Vocab::kUnk;
    const std::string exact = exact_number_token(*v);
    if (vocab.contains(exact)) return vocab.id(exact);
    return vocab.id(number_bucket_token(*v));
  }
  return vocab.id(value);
}

std::string type_token(ValueKind kind, CorpusMode mode) {
  return std::string("<type:") + (kind == ValueKind::kNumber ? "number" : "text") + ":" +
         (mode == CorpusMode::kTable ? "table" : "dialogue") + ">";
}

Vocab build_vocab(const std::vector<Example>& corpus, CorpusMode mode,
                  std::size_t min_exact_count) {
  Vocab v;
  // buckets and type tokens are always available
  v.add("<num:neg>");
  v.add("<num:0>");
  v.add("<num:frac>");
  v.add("<num:1-9>");
  for (int d = 1; d <= 9; ++d)
    v.add("<num:" + std::to_string(d * 10) + "-" + std::to_string(d * 10 + 9) + ">");
  v.add("<num:100+>");
  v.add(type_token(ValueKind::kNumber, mode));
  v.add(type_token(ValueKind::kText, mode));

  std::map<std::string, std::size_t> number_counts;
  for (const Example& ex : corpus) {
    for (const Entity& e : ex.input.entities) {
      v.add(e.name);
      for (const std::string& t : tokenize(e.name)) v.add(t);
    }
    for (const KnowledgeTriple& t : ex.input.triples) {
      if (t.is_hol) continue;
      v.add(t.attribute);
      for (const std::string& tok : tokenize(t.attribute)) v.add(tok);
      if (t.value_kind == ValueKind::kNumber) {
        const auto num = parse_number(t.value);
        if (num) ++number_counts[exact_number_token(*num)];
      } else {
        v.add(t.value);
        for (const std::string& tok : tokenize(t.value)) v.add(tok);
      }
    }
    for (const std::string& u : ex.input.context)
      for (const std::string& tok : tokenize(u)) v.add(tok);
  }
  for (const auto& [token, count] : number_counts)
    if (count >= min_exact_count) v.add(token);
  return v;
}

}  // namespace skh
