#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dyco/errors.hpp"
#include "dyco/numeric.hpp"

namespace dyco {

/// Splits text into lowercase tokens. ASCII letters and digits form tokens; every other
/// ASCII byte separates them. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay
/// whole.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    const bool word = (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
    if (word) {
      cur.push_back((u >= 'A' && u <= 'Z') ? static_cast<char>(u - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Signed feature hashing of a bag of tokens, L2-normalized.
///
/// Each token t is hashed with 64-bit FNV-1a (offset 0xcbf29ce484222325, prime
/// 0x100000001b3). The bucket is h(t) mod dim and the sign is bit 63 of h(t)
/// (set -> -1, clear -> +1). Counts accumulate per bucket; the result is divided by its
/// L2 norm unless that norm is zero. Output is identical on every platform.
inline std::vector<double> hash_embed(std::string_view text, int dim) {
  if (dim <= 0) throw DomainError("hash_embed: dim must be positive");
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a64(tok);
    const auto bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

}  // namespace dyco
