#pragma once

// Approximate k-NN graph over TF-IDF vectors (NN-descent), graph search,
// an exhaustive-scan reference, and 1-D colorfulness neighbors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tti/visual_words.hpp"

namespace tti {

struct Neighbor {
  std::uint32_t index = 0;
  float similarity = 0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NnDescentParams {
  int k = 20;
  std::uint64_t seed = 0;
  double sample_rate = 0.5;
  int max_iters = 12;
  double delta = 0.001;
  /// Worker threads for the local join. Only 1 gives a reproducible graph.
  unsigned workers = 1;
};

class KnnGraph {
 public:
  KnnGraph() = default;
  /// Validates degree, self-edges, ordering and similarity range.
  KnnGraph(std::vector<std::string> ids, int k, std::uint64_t seed, std::vector<Neighbor> edges);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t size() const noexcept { return ids_.size(); }
  int k() const noexcept { return k_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Neighbors of node i, sorted by descending similarity then index.
  std::span<const Neighbor> neighbors(std::size_t i) const {
    return {edges_.data() + i * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
  }
  std::optional<std::size_t> index_of(std::string_view id) const;

  friend bool operator==(const KnnGraph& a, const KnnGraph& b) {
    return a.ids_ == b.ids_ && a.k_ == b.k_ && a.seed_ == b.seed_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<std::string> ids_;
  int k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Neighbor> edges_;
};

struct NnDescentStats {
  int iterations = 0;
  std::vector<std::size_t> updates;  ///< per iteration
};

/// Throws ValidationError when k < 1 or there are fewer than k + 1 vectors.
KnnGraph build_index(const VectorSet& vectors, const NnDescentParams& params, NnDescentStats* stats = nullptr);

struct Hit {
  std::string id;
  double similarity = 0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct QueryParams {
  int k = 10;
  /// Size of the best-first result pool; 0 means max(k, graph degree).
  int pool = 0;
  /// Random entry points for vectors that are not in the graph; 0 means
  /// max(8, 4 sqrt(N)). k-NN graphs of clustered data are often
  /// disconnected, so a handful of entry points can miss the probe's component.
  int entry_points = 0;
  std::uint64_t seed = 0;
};

/// Graph search from an indexed image; the probe itself is excluded.
/// Results are sorted by descending similarity, ties by id.
std::vector<Hit> query(const KnnGraph& graph, const VectorSet& vectors, std::string_view probe_id,
                       const QueryParams& params);
/// Graph search from an external vector.
std::vector<Hit> query(const KnnGraph& graph, const VectorSet& vectors, const SparseVec& probe,
                       const QueryParams& params);

/// Exact top-k by cosine, ties broken by id.
std::vector<Hit> brute_force_knn(const VectorSet& vectors, const SparseVec& probe, int k);
/// Same, excluding the probe's own entry.
std::vector<Hit> brute_force_knn(const VectorSet& vectors, std::string_view probe_id, int k);

/// The k ids whose score is closest to the probe's, ties by id, probe excluded.
std::vector<std::string> colorfulness_neighbors(const std::map<std::string, double>& scores,
                                                std::string_view probe_id, int k);

/// KNN1: magic, u32 N, u32 K, u64 seed, N ids, N*K (u32 index, f32 similarity).
void save_graph(const KnnGraph& graph, const std::filesystem::path& path);
KnnGraph load_graph(const std::filesystem::path& path);

}  // namespace tti
