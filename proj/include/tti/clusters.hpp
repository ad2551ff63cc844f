#pragma once

// Identity regions: Ward clusters of identity-image embeddings, their prompt
// composition, and nearest-centroid assignment of other images.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tti/corpus.hpp"
#include "tti/embeddings.hpp"
#include "tti/ward.hpp"

namespace tti {

struct ClusterModel {
  std::uint32_t n_clusters = 0;
  std::vector<Merge> merges;            ///< full tree, N - 1 merges
  std::vector<std::string> ids;         ///< clustered images, embedding row order
  std::vector<std::uint32_t> labels;    ///< cluster of ids[i]
  RowMatrixXf centroids;                ///< n_clusters x dim, unit rows
  std::string source_hash;              ///< fingerprint of the clustered embeddings
  std::string provenance;               ///< free-form tag written by the pipeline

  std::vector<std::size_t> sizes() const;
  std::map<std::string, std::uint32_t> assignments() const;

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// Ward clustering of the (re-normalized) rows, cut at n_clusters.
/// Throws ValidationError unless 2 <= n_clusters <= N.
ClusterModel ward_cluster(const EmbeddingMatrix& embeddings, std::uint32_t n_clusters);

/// Content fingerprint of an embedding matrix.
std::string embedding_hash(const EmbeddingMatrix& embeddings);

/// Cluster with the largest dot product against the normalized row, lowest
/// index on ties. Throws ValidationError on a dimension mismatch.
std::vector<std::uint32_t> assign(const ClusterModel& model, const EmbeddingMatrix& embeddings);
std::map<std::string, std::uint32_t> assign_map(const ClusterModel& model, const EmbeddingMatrix& embeddings);

enum class Attribute { Gender, Ethnicity, Joint };
std::string_view to_string(Attribute a);
Attribute parse_attribute(std::string_view s);

/// Prompt phrase of an identity image for the attribute; absent slots read
/// as "unspecified".
std::string attribute_phrase(const PromptSpec& prompt, Attribute a);

struct PhraseShare {
  std::string phrase;
  double pct = 0;

  friend bool operator==(const PhraseShare&, const PhraseShare&) = default;
};

struct RegionSummary {
  std::uint32_t cluster = 0;
  std::size_t members = 0;     ///< identity images in the cluster
  double share = 0;            ///< fraction of the evaluated images assigned here
  std::vector<PhraseShare> top_gender;     ///< descending pct, ties by phrase
  std::vector<PhraseShare> top_ethnicity;

  friend bool operator==(const RegionSummary&, const RegionSummary&) = default;
};

/// Composition of every cluster by the prompts of its identity members, and
/// each cluster's share of `eval_assignments`. Model ids missing from the
/// corpus raise ValidationError.
std::vector<RegionSummary> summarize_regions(const ClusterModel& model, const Corpus& identity_corpus,
                                             const std::map<std::string, std::uint32_t>& eval_assignments);

/// Clusters whose ranked phrase list for the attribute has `phrase` within
/// its first `rank_max` entries. Phrases outside the prompt vocabulary raise
/// ValidationError.
std::set<std::uint32_t> select_region_group(const std::vector<RegionSummary>& summaries, Attribute attribute,
                                            std::string_view phrase, std::size_t rank_max);

/// Size-weighted mean over clusters of the base-2 entropy of the attribute's
/// prompt phrases among cluster members.
double attribute_entropy(const ClusterModel& model, const Corpus& identity_corpus, Attribute attribute);

/// Fraction of the matching images assigned to each cluster.
std::vector<double> cluster_distribution(const std::map<std::string, std::uint32_t>& assignments,
                                         const std::vector<std::string>& image_ids, std::uint32_t n_clusters);

/// CLM1: magic, u32 n_clusters, u32 N, u32 dim, N-1 merges (u32, u32, f64, u32),
/// N (id, u32 label), n_clusters*dim f32 centroids, source hash, provenance.
void save_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_model(const std::filesystem::path& path);

}  // namespace tti
