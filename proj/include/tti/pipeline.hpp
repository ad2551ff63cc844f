#pragma once

// On-disk feature stages: per-image SIFT files and colorfulness scores,
// codebook training and TF-IDF vectorization.
//
// Feature directory layout:
//   index.csv          image_id,file
//   <n>.sft            SFT1 descriptors, one file per image
//   colorfulness.csv   image_id,colorfulness

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tti/corpus.hpp"
#include "tti/knn_graph.hpp"
#include "tti/sift.hpp"
#include "tti/visual_words.hpp"

namespace tti {

struct FeatureSummary {
  std::size_t images = 0;
  std::size_t descriptors = 0;
};

FeatureSummary extract_features(const Corpus& corpus, const std::filesystem::path& out_dir,
                                const SiftParams& params = {}, unsigned workers = 1);

/// Descriptor sets in index.csv order.
std::vector<DescriptorSet> load_feature_dir(const std::filesystem::path& dir);

void save_colorfulness(const std::map<std::string, double>& scores, const std::filesystem::path& path);
std::map<std::string, double> load_colorfulness(const std::filesystem::path& path);

/// Trains the codebook and fills its idf weights from the same images.
Codebook build_codebook(std::span<const DescriptorSet> sets, int k, std::uint64_t seed, int max_iter = 100,
                        unsigned workers = 1);

VectorSet vectorize_all(std::span<const DescriptorSet> sets, const Codebook& codebook, unsigned workers = 1);

inline constexpr const char* kVectorsFile = "vectors.spv";
inline constexpr const char* kGraphFile = "index.knn";
inline constexpr const char* kColorfulnessFile = "colorfulness.csv";

}  // namespace tti
