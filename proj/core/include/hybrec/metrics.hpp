#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace hybrec {

// A ranking (best first) judged against a set of relevant ids at cutoff k.
struct RankedList {
  std::vector<std::uint32_t> ranking;
  std::unordered_set<std::uint32_t> relevant;
  std::size_t k = 10;
};

// Binary relevance. All three metrics are 0 when `relevant` is empty.
double precision_at_k(const RankedList& r);
double recall_at_k(const RankedList& r);
// DCG = sum_{i<=k} rel_i / log2(i + 1); IDCG truncated at min(k, |relevant|).
double ndcg_at_k(const RankedList& r);

struct LatencyStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample (n - 1); 0 for a single sample
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

// Percentiles by nearest rank: the ceil(p/100 * n)-th smallest sample.
// Throws InvalidArgument on empty input.
LatencyStats latency_stats(std::span<const double> samples_ms);

// "mean ± std" with both rounded to integer milliseconds, e.g. "140 ± 12".
std::string format_mean_std(double mean_ms, double std_ms);

}  // namespace hybrec
