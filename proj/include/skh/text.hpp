// Tokenization and string helpers shared by corpus labeling, embedding and
// template realization. Tokens are whitespace-separated with leading and
// trailing ASCII punctuation split off as their own tokens, so "26 points."
// yields ["26", "points", "."].

#ifndef SKH_TEXT_HPP
#define SKH_TEXT_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace skh {

inline bool is_split_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case '!':
    case '?':
    case ';':
    case ':':
    case '(':
    case ')':
    case '"':
      return true;
    default:
      return false;
  }
}

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t a = i, b = j;  // word is text[a, b)
    while (a < b && is_split_punct(text[a])) {
      out.push_back(std::string(1, text[a]));
      ++a;
    }
    std::size_t trail = b;
    while (trail > a && is_split_punct(text[trail - 1])) --trail;
    if (trail > a) out.push_back(text.substr(a, trail - a));
    for (std::size_t k = trail; k < b; ++k) out.push_back(std::string(1, text[k]));
    i = j;
  }
  return out;
}

// Parses a finite decimal; rejects trailing garbage.
inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

// Canonical text form of a numeric value: "26.0" and "26" agree.
inline std::string canonical_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Longest common subsequence length over token vectors.
inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Position in b of the first token of the leftmost maximal LCS alignment of
// a against b, or npos when the LCS is empty.
inline std::size_t lcs_first_match_pos(const std::vector<std::string>& a,
                                       const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return std::string::npos;
  // L[i][j] = LCS length of a[i..) vs b[j..)
  std::vector<std::vector<std::size_t>> L(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      L[i][j] = a[i] == b[j] ? L[i + 1][j + 1] + 1 : std::max(L[i + 1][j], L[i][j + 1]);
  if (L[0][0] == 0) return std::string::npos;
  // walk the leftmost alignment and report where it first consumes from b
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j] && L[i][j] == L[i + 1][j + 1] + 1) return j;
    if (L[i + 1][j] >= L[i][j + 1])
      ++i;
    else
      ++j;
  }
  return std::string::npos;
}

}  // namespace skh

#endif  // SKH_TEXT_HPP
