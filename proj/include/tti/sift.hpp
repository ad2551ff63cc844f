#pragma once

// Scale-invariant keypoints and 128-dimensional gradient-histogram descriptors.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tti/image.hpp"

namespace tti {

inline constexpr int kDescriptorDim = 128;
using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor>;

struct Keypoint {
  float x = 0;            ///< column, input-image pixels
  float y = 0;            ///< row, input-image pixels
  float scale = 0;        ///< blur sigma in input-image pixels
  float orientation = 0;  ///< radians in [0, 2*pi), image coordinates (y down)

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct SiftParams {
  double sigma = 1.6;
  int scales_per_octave = 3;
  /// Octaves are added while the shorter image side is at least this long.
  int min_octave_side = 16;
  /// Threshold on |DoG| at the refined extremum, divided by scales_per_octave,
  /// for intensities in [0, 1].
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  /// Blur assumed to be already present in the input.
  double assumed_blur = 0.5;
  float clamp = 0.2f;
};

struct DescriptorSet {
  std::string image_id;
  std::vector<Keypoint> keypoints;
  DescriptorMatrix descriptors;  ///< row i describes keypoints[i]; unit L2 norm

  std::size_t size() const noexcept { return keypoints.size(); }
};

/// Detects keypoints and computes descriptors on the luma channel
/// (0.299 R + 0.587 G + 0.114 B). Throws ValidationError when the shorter
/// side is below 32 pixels. Output is bitwise deterministic.
DescriptorSet sift_descriptors(const RgbImage& image, const SiftParams& params = {});

/// Unit-normalizes a raw histogram, clamps entries at `clamp`, and
/// renormalizes. `clamped`, when given, receives the vector before the
/// final renormalization.
Eigen::VectorXf clamp_and_renormalize(const Eigen::VectorXf& raw, float clamp,
                                      Eigen::VectorXf* clamped = nullptr);

/// SFT1: magic, u32 count, count x 132 f32 (x, y, scale, orientation, 128 descriptor).
void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet load_descriptors(const std::filesystem::path& path, std::string image_id = {});

}  // namespace tti
