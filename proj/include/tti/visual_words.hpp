#pragma once

// Bag-of-visual-words: k-means codebook over SIFT descriptors and smooth
// TF-IDF sparse vectors.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tti/embeddings.hpp"
#include "tti/sift.hpp"

namespace tti {

using SparseVec = Eigen::SparseVector<double>;

struct KMeansResult {
  RowMatrixXf centroids;
  std::vector<std::uint32_t> labels;
  /// Inertia after each assignment step; the last entry is the final inertia.
  std::vector<double> inertia_trace;
  int iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding. Arithmetic is in double; the
/// result does not depend on `workers`. Throws ValidationError if k < 2 or
/// there are fewer rows than k.
KMeansResult kmeans(const RowMatrixXf& points, int k, std::uint64_t seed, int max_iter = 100,
                    unsigned workers = 1);

struct Codebook {
  RowMatrixXf centroids;  ///< k x dim
  std::uint64_t seed = 0;
  double inertia = 0;
  Eigen::VectorXf idf;  ///< length k once computed; empty before

  int k() const noexcept { return static_cast<int>(centroids.rows()); }
  int dim() const noexcept { return static_cast<int>(centroids.cols()); }
};

Codebook train_codebook(std::span<const DescriptorSet> sets, int k, std::uint64_t seed, int max_iter = 100,
                        unsigned workers = 1);

/// Index of the nearest centroid by Euclidean distance, lowest index on ties.
std::uint32_t nearest_word(const Eigen::Ref<const Eigen::RowVectorXf>& x, const RowMatrixXf& centroids);

/// Per-word descriptor counts for one image.
std::vector<std::uint32_t> word_counts(const DescriptorMatrix& descriptors, const RowMatrixXf& centroids);

/// idf[w] = ln((1 + N) / (1 + df_w)) + 1 over N per-image count vectors.
Eigen::VectorXf compute_idf(std::span<const std::vector<std::uint32_t>> counts, int k);

/// tf * idf, L2-normalized. Zero descriptors give an empty vector of size k.
SparseVec tfidf(std::span<const std::uint32_t> counts, const Eigen::VectorXf& idf);
SparseVec vectorize(const DescriptorMatrix& descriptors, const Codebook& codebook, const Eigen::VectorXf& idf);

/// Dot product of normalized vectors clamped to [0, 1]; 0 when either is
/// empty. Throws ValidationError on a dimension mismatch.
double cosine(const SparseVec& a, const SparseVec& b);

struct VectorSet {
  std::vector<std::string> ids;
  std::vector<SparseVec> vectors;
  int dim = 0;

  std::size_t size() const noexcept { return ids.size(); }
};

/// CBK1: magic, u32 k, u32 dim, u64 seed, k*dim f32 centroids, k f32 idf.
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

/// SPV1: magic, u32 count, u32 dim, then per vector: id, u32 nnz, nnz x (u32 index, f64 value).
void save_vectors(const VectorSet& set, const std::filesystem::path& path);
VectorSet load_vectors(const std::filesystem::path& path);

}  // namespace tti
