#include "hybrec/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hybrec/errors.hpp"

namespace hybrec {

namespace {

void check_k(const RankedList& r) {
  if (r.k == 0) throw InvalidArgument("ranking metrics: k must be >= 1");
}

std::size_t hits_in_top_k(const RankedList& r) {
  const std::size_t n = std::min(r.k, r.ranking.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += r.relevant.contains(r.ranking[i]) ? 1 : 0;
  return hits;
}

}  // namespace

double precision_at_k(const RankedList& r) {
  check_k(r);
  if (r.relevant.empty()) return 0.0;
  return static_cast<double>(hits_in_top_k(r)) / static_cast<double>(r.k);
}

double recall_at_k(const RankedList& r) {
  check_k(r);
  if (r.relevant.empty()) return 0.0;
  return static_cast<double>(hits_in_top_k(r)) / static_cast<double>(r.relevant.size());
}

double ndcg_at_k(const RankedList& r) {
  check_k(r);
  if (r.relevant.empty()) return 0.0;
  const std::size_t n = std::min(r.k, r.ranking.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.relevant.contains(r.ranking[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  const std::size_t ideal = std::min(r.k, r.relevant.size());
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

LatencyStats latency_stats(std::span<const double> samples_ms) {
  if (samples_ms.empty()) throw InvalidArgument("latency_stats: no samples");
  std::vector<double> sorted(samples_ms.begin(), samples_ms.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  LatencyStats s;
  s.count = n;
  double sum = 0.0;
  for (double v : samples_ms) sum += v;
  s.mean_ms = sum / static_cast<double>(n);
  if (n > 1) {
    double sq = 0.0;
    for (double v : samples_ms) sq += (v - s.mean_ms) * (v - s.mean_ms);
    s.std_ms = std::sqrt(sq / static_cast<double>(n - 1));
  }
  const auto nearest_rank = [&](double p) {
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
  };
  s.p50_ms = nearest_rank(50.0);
  s.p99_ms = nearest_rank(99.0);
  s.min_ms = sorted.front();
  s.max_ms = sorted.back();
  return s;
}

std::string format_mean_std(double mean_ms, double std_ms) {
  return std::to_string(std::llround(mean_ms)) + " ± " + std::to_string(std::llround(std_ms));
}

}  // namespace hybrec
