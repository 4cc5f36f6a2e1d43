#include "hybrec/text_encoder.hpp"

#include <cmath>

#include "hybrec/errors.hpp"
#include "hybrec/rng.hpp"

namespace hybrec {

namespace {

bool is_alnum_ascii(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char lower_ascii(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c); }

}  // namespace

TokenBag tokenize(std::string_view text) {
  TokenBag bag;
  std::string current;
  for (unsigned char c : text) {
    if (is_alnum_ascii(c)) {
      current.push_back(lower_ascii(c));
    } else if (!current.empty()) {
      ++bag[current];
      current.clear();
    }
  }
  if (!current.empty()) ++bag[current];
  return bag;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t bucket_of(std::string_view token, std::size_t num_buckets) {
  if (num_buckets == 0) throw InvalidArgument("bucket_of: num_buckets must be >= 1");
  return static_cast<std::size_t>(fnv1a64(token) % num_buckets);
}

BucketBag to_buckets(const TokenBag& bag, std::size_t num_buckets) {
  std::map<std::uint32_t, double> folded;
  for (const auto& [token, count] : bag) {
    folded[static_cast<std::uint32_t>(bucket_of(token, num_buckets))] += count;
  }
  BucketBag out;
  out.entries.assign(folded.begin(), folded.end());
  return out;
}

double encode_buckets(const BucketBag& bag, const Matrix& table, std::span<double> out) {
  if (out.size() != table.cols()) throw InvalidArgument("encode_buckets: output width must equal table width");
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& [bucket, count] : bag.entries) {
    if (bucket >= table.rows()) throw InvalidArgument("encode_buckets: bucket outside table");
    const auto row = table.row(bucket);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += count * row[j];
  }
  double sq = 0.0;
  for (double v : out) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > 0.0) {
    for (double& v : out) v /= norm;
  }
  return norm;
}

Matrix make_text_table(std::size_t num_buckets, std::size_t dim, std::uint64_t seed) {
  if (num_buckets == 0 || dim == 0) throw InvalidArgument("make_text_table: empty table");
  Matrix table(num_buckets, dim);
  Rng rng(seed);
  for (double& v : table.values()) v = rng.normal();
  return table;
}

std::vector<double> encode_text(std::string_view text, const Matrix& table) {
  std::vector<double> out(table.cols());
  encode_buckets(to_buckets(tokenize(text), table.rows()), table, out);
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace hybrec
