// Token vocabulary with fixed reserved ids and magnitude bucketing for
// numbers. Numbers seen often enough in training additionally get an
// exact-value token; rare numbers fall back to their bucket.

#ifndef SKH_VOCAB_HPP
#define SKH_VOCAB_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "skh/schema.hpp"

namespace skh {

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kHol = 4;
  static constexpr std::size_t kStop = 5;

  Vocab();

  std::size_t add(const std::string& token);          // idempotent
  std::size_t id(const std::string& token) const;     // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> ids_;
};

// Magnitude bucket token: 0, 1-9, 10-19, ..., 90-99, 100+ (plus sign/zero
// special cases for values outside the table range).
std::string number_bucket_token(double v);
std::string exact_number_token(double v);

// Id of the value slot of a triple: exact-number token when the vocab has
// one, its magnitude bucket otherwise, the raw string for text values.
std::size_t value_token_id(const Vocab& vocab, const std::string& value, ValueKind kind);

// Scans a training corpus and builds the shared vocabulary: entity names,
// attributes, values (with numeric bucketing and >= min_exact_count exact
// tokens), context tokens and type tokens.
Vocab build_vocab(const std::vector<Example>& corpus, CorpusMode mode,
                  std::size_t min_exact_count = 5);

std::string type_token(ValueKind kind, CorpusMode mode);

}  // namespace skh

#endif  // SKH_VOCAB_HPP
