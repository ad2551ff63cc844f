#include "tti/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"
#include "tti/parallel.hpp"

namespace tti {

double entropy_bits(std::span<const double> probs) {
  double h = 0;
  for (double p : probs) {
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

double assignment_entropy(std::span<const std::uint32_t> assignments, std::uint32_t n_clusters) {
  if (assignments.empty()) throw ValidationError("entropy of an empty assignment list");
  std::vector<std::size_t> counts(n_clusters, 0);
  for (auto a : assignments) {
    if (a >= n_clusters) {
      throw ValidationError("cluster id " + std::to_string(a) + " >= n_clusters " + std::to_string(n_clusters));
    }
    ++counts[a];
  }
  std::vector<double> p(n_clusters);
  for (std::uint32_t c = 0; c < n_clusters; ++c) p[c] = static_cast<double>(counts[c]) / assignments.size();
  return entropy_bits(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of empty data");
  const double h = (sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(std::span<const std::uint32_t> assignments, const Statistic& statistic,
                      const BootstrapOptions& o, std::vector<double>* replicates) {
  const std::size_t n = assignments.size();
  if (n < 2) throw ValidationError("bootstrap needs at least 2 observations, got " + std::to_string(n));
  if (o.resamples < 100) throw ValidationError("bootstrap needs at least 100 resamples");
  if (!(o.level > 0 && o.level < 1)) throw ValidationError("confidence level must be in (0, 1)");

  std::vector<double> stats(static_cast<std::size_t>(o.resamples));
  parallel_for(stats.size(), o.workers, [&](std::size_t b) {
    std::mt19937_64 rng(splitmix64(splitmix64(o.seed) + b));
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = assignments[rng() % n];
    stats[b] = statistic(sample);
  });
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - o.level) / 2.0;
  Interval ci{quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
  if (replicates) *replicates = std::move(stats);
  return ci;
}

DiversityScore diversity_score(std::span<const std::uint32_t> assignments, std::uint32_t n_clusters,
                               const BootstrapOptions& options) {
  DiversityScore d;
  d.entropy_bits = assignment_entropy(assignments, n_clusters);
  const auto ci = bootstrap_ci(
      assignments, [n_clusters](std::span<const std::uint32_t> s) { return assignment_entropy(s, n_clusters); },
      options);
  d.ci_low = std::min(ci.low, d.entropy_bits);
  d.ci_high = std::max(ci.high, d.entropy_bits);
  d.n = assignments.size();
  d.n_clusters = n_clusters;
  d.level = options.level;
  d.bootstrap_b = options.resamples;
  d.seed = options.seed;
  return d;
}

std::array<std::vector<std::string>, 5> quintile_bins(const BlsTable& bls, BlsKey key) {
  const std::size_t n = bls.size();
  if (n < 5) throw ValidationError("quintiles need at least 5 professions, got " + std::to_string(n));
  std::vector<const BlsRow*> rows;
  for (const auto& r : bls.rows()) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [key](const BlsRow* a, const BlsRow* b) {
    const double va = a->value(key), vb = b->value(key);
    return va < vb || (va == vb && a->profession < b->profession);
  });
  std::array<std::vector<std::string>, 5> bins;
  std::size_t at = 0;
  for (std::size_t q = 0; q < 5; ++q) {
    const std::size_t size = n / 5 + (q < n % 5 ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) bins[q].push_back(rows[at++]->profession);
  }
  return bins;
}

QuintileReport quintile_report(const ProfessionAssignments& assignments, const std::set<std::uint32_t>& region_group,
                               const BlsTable& bls, BlsKey key, const BootstrapOptions& options) {
  QuintileReport rep;
  rep.key = key;
  rep.region_group = region_group;
  rep.level = options.level;
  rep.bootstrap_b = options.resamples;
  rep.seed = options.seed;
  const auto bins = quintile_bins(bls, key);
  auto in_group = [&](std::span<const std::uint32_t> s) {
    std::size_t c = 0;
    for (auto a : s) c += region_group.count(a);
    return 100.0 * static_cast<double>(c) / static_cast<double>(s.size());
  };
  for (std::size_t q = 0; q < 5; ++q) {
    auto& row = rep.rows[q];
    row.professions = bins[q];
    double sum = 0;
    for (const auto& p : bins[q]) sum += bls.find(p)->value(key);
    row.bls_mean = sum / static_cast<double>(bins[q].size());
    for (const auto& [system, per_prof] : assignments) {
      std::vector<std::uint32_t> pooled;
      for (const auto& p : bins[q]) {
        auto it = per_prof.find(p);
        if (it == per_prof.end() || it->second.empty()) {
          rep.errata.push_back(system + ": " + p);
          continue;
        }
        pooled.insert(pooled.end(), it->second.begin(), it->second.end());
      }
      QuintileCell cell;
      cell.images = pooled.size();
      if (!pooled.empty()) {
        cell.share_pct = in_group(pooled);
        cell.ci_low = cell.ci_high = cell.share_pct;
        if (pooled.size() >= 2) {
          // Independent but reproducible stream per (quintile, system).
          BootstrapOptions o = options;
          o.seed = splitmix64(options.seed ^ (q * 0x100000001b3ULL)) ^ io::fnv1a64(system);
          const auto ci = bootstrap_ci(pooled, in_group, o);
          cell.ci_low = std::min(ci.low, cell.share_pct);
          cell.ci_high = std::max(ci.high, cell.share_pct);
        }
      }
      row.systems[system] = cell;
    }
  }
  return rep;
}

}  // namespace tti
