// Shared error types and deterministic RNG utilities.
//
// Every stochastic component in the project (init, dropout, shuffling,
// synthesis) draws from RngStream so that a run is a pure function of its
// seed. std::shuffle and the std distributions are implementation-defined,
// so sampling is done by hand here.

#ifndef SKH_COMMON_HPP
#define SKH_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace skh {

// Raised when tensor shapes or dims disagree.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on malformed input files (carries line/record context in the message).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a domain invariant does not hold for otherwise well-formed data.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on non-finite values or degenerate numeric situations (all-blocked
// softmax rows, non-finite losses, ...).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when training inputs are inconsistent with the model setup
// (e.g. a gold label landing on a masked candidate).
class TrainingSetupError : public std::runtime_error {
 public:
  explicit TrainingSetupError(const std::string& what)
      : std::runtime_error(what) {}
};

// splitmix64 step; also used as a mixing function for stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic, forkable random stream. fork() derives an independent
// substream from a salt, so per-example / per-node streams do not depend on
// call order elsewhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant at our scales and
  // keeps the mapping platform-stable.
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  // Standard normal via Box-Muller. The spare value is discarded so each
  // call consumes a fixed number of raw draws.
  double normal();

  RngStream fork(std::uint64_t salt) const {
    std::uint64_t s = state_ ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
    // one mixing round so sibling forks decorrelate
    std::uint64_t tmp = s;
    return RngStream(splitmix64(tmp));
  }

  // In-place Fisher-Yates; deterministic across platforms.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace skh

#endif  // SKH_COMMON_HPP
