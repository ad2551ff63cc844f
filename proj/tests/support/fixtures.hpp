#pragma once

// Deterministic synthetic inputs shared by the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tti/clusters.hpp"
#include "tti/corpus.hpp"
#include "tti/embeddings.hpp"
#include "tti/image.hpp"
#include "tti/markers.hpp"
#include "tti/sift.hpp"
#include "tti/visual_words.hpp"

namespace tti::fixture {

/// Fresh directory under the system temp dir; removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Dark background with bright Gaussian spots of sigma `spot_sigma`.
RgbImage blob_image(int width, int height, const std::vector<std::pair<double, double>>& centers,
                    double spot_sigma = 3.0);

/// Uniform random RGB noise.
RgbImage noise_image(int width, int height, std::uint64_t seed);

/// Smooth random texture: a few random blobs on a colored gradient.
RgbImage texture_image(int width, int height, std::uint64_t seed);

/// Unit rows drawn from a standard normal.
Eigen::MatrixXd random_unit_rows(int n, int dim, std::uint64_t seed);

struct TopicParams {
  int n = 2000;
  int dim = 1024;
  int topics = 40;
  int words_per_topic = 50;
  double topic_mix = 0.7;  ///< probability a word is drawn from the vector's topic
  int words_per_vector = 80;
  std::uint64_t seed = 1;
};

/// Sparse tf-idf-like vectors with latent topic structure.
VectorSet topic_vectors(const TopicParams& p);

/// Descriptor set whose rows are the given 128-d points.
DescriptorSet descriptor_set(const std::string& id, const std::vector<std::vector<float>>& rows);

/// Table 2 of the regions figure, with full prompt phrases.
std::vector<RegionSummary> table2_regions();

struct CaptionTally {
  std::vector<std::string> texts;
  MarkerStats expected;
};

/// Twenty captions with their hand-counted marker tallies.
CaptionTally twenty_caption_tally();

struct EndToEnd {
  std::filesystem::path manifest;
  std::filesystem::path bls;
  std::filesystem::path embeddings;
  std::filesystem::path annotations;
  std::filesystem::path config;
  std::vector<std::string> systems;
  std::vector<std::string> professions;  ///< professions with images
};

/// 200 images over 2 systems: 136 identity portraits (68 prompts per system)
/// and 64 profession portraits (8 professions x 4 seeds per system), with
/// 16-d embeddings whose gender and ethnicity directions are recoverable,
/// captions, a 10-row BLS table and a canonical audit config. When
/// `images` is set, 64x64 PNG files are written too.
EndToEnd write_end_to_end(const std::filesystem::path& dir, bool images = false);

/// Every file under `dir` (relative path -> bytes).
std::map<std::string, std::string> snapshot(const std::filesystem::path& dir);

}  // namespace tti::fixture
