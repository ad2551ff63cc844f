#pragma once

// Assignment-entropy diversity, percentile bootstrap intervals and the BLS
// quintile comparison.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tti/corpus.hpp"

namespace tti {

/// Shannon entropy in bits of a probability vector; 0 log 0 = 0.
double entropy_bits(std::span<const double> probs);

/// Entropy of the empirical cluster distribution. Throws ValidationError on
/// empty input or a label >= n_clusters.
double assignment_entropy(std::span<const std::uint32_t> assignments, std::uint32_t n_clusters);

struct Interval {
  double low = 0;
  double high = 0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

using Statistic = std::function<double(std::span<const std::uint32_t>)>;

struct BootstrapOptions {
  double level = 0.95;
  int resamples = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// Resample b is seeded with splitmix64(splitmix64(seed) + b), so results do
/// not depend on `workers` and adjacent seeds do not share streams.
std::uint64_t splitmix64(std::uint64_t x);

/// Percentile bootstrap over the assignment list. Quantiles use linear
/// interpolation between order statistics. `replicates`, when given,
/// receives the sorted resampled statistics. Throws ValidationError when
/// n < 2, resamples < 100 or level is outside (0, 1).
Interval bootstrap_ci(std::span<const std::uint32_t> assignments, const Statistic& statistic,
                      const BootstrapOptions& options, std::vector<double>* replicates = nullptr);

/// Linear-interpolation quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

struct DiversityScore {
  double entropy_bits = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t n = 0;
  std::uint32_t n_clusters = 0;
  double level = 0;
  int bootstrap_b = 0;
  std::uint64_t seed = 0;
};

/// Entropy with its bootstrap interval. The interval is widened to contain
/// the point estimate when the resampled distribution excludes it.
DiversityScore diversity_score(std::span<const std::uint32_t> assignments, std::uint32_t n_clusters,
                               const BootstrapOptions& options);

/// Professions sorted ascending by the key (ties by name) and split into
/// five contiguous bins; the first N mod 5 bins get one extra entry.
std::array<std::vector<std::string>, 5> quintile_bins(const BlsTable& bls, BlsKey key);

struct QuintileCell {
  double share_pct = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t images = 0;
};

struct QuintileRow {
  std::vector<std::string> professions;
  double bls_mean = 0;
  std::map<std::string, QuintileCell> systems;
};

struct QuintileReport {
  BlsKey key = BlsKey::PctWomen;
  std::set<std::uint32_t> region_group;
  std::array<QuintileRow, 5> rows;
  double level = 0;
  int bootstrap_b = 0;
  std::uint64_t seed = 0;
  /// "<system>: <profession>" for binned professions without assignments.
  std::vector<std::string> errata;
};

/// system -> profession -> cluster assignments of that profession's images.
using ProfessionAssignments = std::map<std::string, std::map<std::string, std::vector<std::uint32_t>>>;

/// Per quintile and system: pooled share of images in the region group with
/// a bootstrap interval over the pooled list.
QuintileReport quintile_report(const ProfessionAssignments& assignments, const std::set<std::uint32_t>& region_group,
                               const BlsTable& bls, BlsKey key, const BootstrapOptions& options);

}  // namespace tti
