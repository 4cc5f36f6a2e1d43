#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybrec/linalg.hpp"

namespace hybrec {

// Lowercased ASCII-alphanumeric tokens with their multiplicities.
using TokenBag = std::map<std::string, std::uint32_t>;

// Splits on every byte that is not an ASCII letter or digit (so any non-ASCII
// codepoint also separates), lowercases, drops empty tokens.
TokenBag tokenize(std::string_view text);

// 64-bit FNV-1a (offset basis 0xcbf29ce484222325, prime 0x100000001b3).
// This is the pinned bucket hash: changing it changes every stored corpus.
std::uint64_t fnv1a64(std::string_view bytes);

std::size_t bucket_of(std::string_view token, std::size_t num_buckets);

// Token counts folded onto hash buckets, sorted by bucket.
struct BucketBag {
  std::vector<std::pair<std::uint32_t, double>> entries;
  bool empty() const { return entries.empty(); }
};

BucketBag to_buckets(const TokenBag& bag, std::size_t num_buckets);

// out = normalize(sum count * table[bucket]); zero when the bag is empty.
// Returns the pre-normalization L2 norm (0 for an empty bag).
double encode_buckets(const BucketBag& bag, const Matrix& table, std::span<double> out);

// Embedding table for the hashed encoder: num_buckets x dim, N(0, 1) entries
// drawn row by row from the seed.
Matrix make_text_table(std::size_t num_buckets, std::size_t dim, std::uint64_t seed);

// encode_buckets(to_buckets(tokenize(text))) against an explicit table.
std::vector<double> encode_text(std::string_view text, const Matrix& table);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace hybrec
