#pragma once

// Opponent-channel colorfulness proxy (Hasler & Suesstrunk):
//   rg = R - G,  yb = (R + G) / 2 - B
//   M  = sqrt(var(rg) + var(yb)) + 0.3 * sqrt(mean(rg)^2 + mean(yb)^2)
// computed over raw 8-bit channel values with population variances.

#include <cmath>

#include "tti/error.hpp"
#include "tti/image.hpp"

namespace tti {

template <typename Scalar = double>
Scalar colorfulness(const RgbImage& image) {
  if (image.empty()) throw ValidationError("colorfulness of an empty image");
  const auto px = image.pixels();
  const auto n = static_cast<Scalar>(image.pixel_count());

  Scalar sum_rg = 0, sum_yb = 0;
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const Scalar r = px[i], g = px[i + 1], b = px[i + 2];
    sum_rg += r - g;
    sum_yb += Scalar(0.5) * (r + g) - b;
  }
  const Scalar mean_rg = sum_rg / n;
  const Scalar mean_yb = sum_yb / n;

  // Second pass keeps the variance free of catastrophic cancellation.
  Scalar ss_rg = 0, ss_yb = 0;
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const Scalar r = px[i], g = px[i + 1], b = px[i + 2];
    const Scalar d_rg = (r - g) - mean_rg;
    const Scalar d_yb = (Scalar(0.5) * (r + g) - b) - mean_yb;
    ss_rg += d_rg * d_rg;
    ss_yb += d_yb * d_yb;
  }
  using std::sqrt;
  return sqrt(ss_rg / n + ss_yb / n) + Scalar(0.3) * sqrt(mean_rg * mean_rg + mean_yb * mean_yb);
}

}  // namespace tti
