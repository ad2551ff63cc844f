#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tti {

/// 8-bit RGB image, row-major, 3 bytes per pixel.
class RgbImage {
 public:
  RgbImage() = default;
  /// Throws ValidationError when width*height*3 != pixels.size().
  RgbImage(int width, int height, std::vector<std::uint8_t> pixels);
  /// Uniformly filled image.
  RgbImage(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return pixel_count() == 0; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::uint8_t* at(int x, int y) { return &pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3];
  }

  /// Rotates the pixel grid 90 degrees clockwise.
  RgbImage rotated90() const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Decodes PNG, JPEG or binary PPM (P6), detected from the file signature.
/// Alpha and 16-bit depth are reduced to 8-bit RGB.
RgbImage load_image(const std::filesystem::path& path);
RgbImage decode_image(std::span<const std::uint8_t> bytes);

void save_png(const RgbImage& image, const std::filesystem::path& path);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

}  // namespace tti
