#pragma once

// Independent reference implementations used to check the library. Nothing
// here calls into ragqa arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

inline long double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

inline long double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const long double na = std::sqrt(naive_dot(a, a));
  const long double nb = std::sqrt(naive_dot(b, b));
  return naive_dot(a, b) / (na * nb);
}

struct Hit {
  std::string id;
  long double score;
};

// Exhaustive scan: score every row, order by score desc then id asc.
inline std::vector<Hit> brute_force_top_k(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                                          const std::vector<double>& query, std::size_t k) {
  std::vector<Hit> hits;
  for (const auto& [id, v] : rows) hits.push_back({id, naive_cosine(v, query)});
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::size_t whitespace_tokens(const std::string& s) {
  std::istringstream in(s);
  std::string w;
  std::size_t n = 0;
  while (in >> w) ++n;
  return n;
}

// Half-up rounding to hundredths of a percent via long division on integers.
inline long long hundredths(long long count, long long total) {
  const long long scaled = count * 10000;
  long long q = scaled / total;
  if ((scaled % total) * 2 >= total) ++q;
  return q;
}

}  // namespace oracle
