#include "tti/sift.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"

namespace tti {

namespace {

using Plane = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kBorder = 5;
constexpr int kMaxInterpSteps = 5;
constexpr int kOriBins = 36;
constexpr float kOriPeakRatio = 0.8f;
constexpr float kOriSigmaFactor = 1.5f;
constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr float kDescScale = 3.0f;
constexpr float kTwoPi = 2.0f * std::numbers::pi_v<float>;

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Plane to_luma(const RgbImage& img) {
  Plane out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto* p = img.at(x, y);
      out(y, x) = static_cast<float>((0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0);
    }
  }
  return out;
}

std::vector<float> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  std::vector<float> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / sum);
  return out;
}

Plane blur(const Plane& src, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  Plane tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src(y, reflect101(x + i, w));
      tmp(y, x) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(reflect101(y + i, h), x);
      out(y, x) = acc;
    }
  }
  return out;
}

Plane downsample(const Plane& src) {
  const Eigen::Index h = (src.rows() + 1) / 2, w = (src.cols() + 1) / 2;
  Plane out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) out(y, x) = src(2 * y, 2 * x);
  }
  return out;
}

struct Pyramid {
  std::vector<std::vector<Plane>> gauss;  // [octave][s + 3]
  std::vector<std::vector<Plane>> dog;    // [octave][s + 2]
};

Pyramid build_pyramid(const Plane& base_in, const SiftParams& p) {
  const int s = p.scales_per_octave;
  const double k = std::pow(2.0, 1.0 / s);
  std::vector<double> inc(s + 3);
  for (int i = 1; i < s + 3; ++i) {
    const double prev = p.sigma * std::pow(k, i - 1);
    const double total = prev * k;
    inc[i] = std::sqrt(total * total - prev * prev);
  }
  Pyramid pyr;
  const double first = std::sqrt(std::max(p.sigma * p.sigma - p.assumed_blur * p.assumed_blur, 0.01));
  Plane base = blur(base_in, first);
  while (std::min(base.rows(), base.cols()) >= p.min_octave_side) {
    std::vector<Plane> g;
    g.reserve(s + 3);
    g.push_back(base);
    for (int i = 1; i < s + 3; ++i) g.push_back(blur(g.back(), inc[i]));
    std::vector<Plane> d;
    d.reserve(s + 2);
    for (int i = 0; i < s + 2; ++i) d.push_back(g[i + 1] - g[i]);
    base = downsample(g[s]);
    pyr.gauss.push_back(std::move(g));
    pyr.dog.push_back(std::move(d));
  }
  return pyr;
}

bool is_extremum(const std::vector<Plane>& dog, int layer, int y, int x, float thr) {
  const float v = dog[layer](y, x);
  if (std::abs(v) <= thr) return false;
  for (int l = layer - 1; l <= layer + 1; ++l) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (l == layer && dy == 0 && dx == 0) continue;
        const float n = dog[l](y + dy, x + dx);
        if (v > 0 ? n > v : n < v) return false;
      }
    }
  }
  return true;
}

struct Refined {
  int layer, y, x;
  double xi, xr, xc;  // sub-pixel offsets (layer, row, col)
};

// Quadratic refinement of a scale-space extremum; rejects low-contrast and
// edge-like responses.
std::optional<Refined> refine(const std::vector<Plane>& dog, int layer, int y, int x, const SiftParams& p) {
  const int s = p.scales_per_octave;
  const int h = static_cast<int>(dog[0].rows()), w = static_cast<int>(dog[0].cols());
  Eigen::Vector3d off = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad;
  int step = 0;
  for (; step < kMaxInterpSteps; ++step) {
    const Plane &prev = dog[layer - 1], &cur = dog[layer], &next = dog[layer + 1];
    grad << 0.5 * (cur(y, x + 1) - cur(y, x - 1)), 0.5 * (cur(y + 1, x) - cur(y - 1, x)),
        0.5 * (next(y, x) - prev(y, x));
    const double c2 = 2.0 * cur(y, x);
    const double dxx = cur(y, x + 1) + cur(y, x - 1) - c2;
    const double dyy = cur(y + 1, x) + cur(y - 1, x) - c2;
    const double dss = next(y, x) + prev(y, x) - c2;
    const double dxy = 0.25 * (cur(y + 1, x + 1) - cur(y + 1, x - 1) - cur(y - 1, x + 1) + cur(y - 1, x - 1));
    const double dxs = 0.25 * (next(y, x + 1) - next(y, x - 1) - prev(y, x + 1) + prev(y, x - 1));
    const double dys = 0.25 * (next(y + 1, x) - next(y - 1, x) - prev(y + 1, x) + prev(y - 1, x));
    Eigen::Matrix3d H;
    H << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(H);
    if (!lu.isInvertible()) return std::nullopt;
    off = -lu.solve(grad);
    if ((off.array().abs() < 0.5).all()) break;
    if ((off.array().abs() > 1e6).any()) return std::nullopt;
    x += static_cast<int>(std::lround(off(0)));
    y += static_cast<int>(std::lround(off(1)));
    layer += static_cast<int>(std::lround(off(2)));
    if (layer < 1 || layer > s || x < kBorder || x >= w - kBorder || y < kBorder || y >= h - kBorder) {
      return std::nullopt;
    }
  }
  if (step >= kMaxInterpSteps) return std::nullopt;

  const Plane &prev = dog[layer - 1], &cur = dog[layer], &next = dog[layer + 1];
  grad << 0.5 * (cur(y, x + 1) - cur(y, x - 1)), 0.5 * (cur(y + 1, x) - cur(y - 1, x)),
      0.5 * (next(y, x) - prev(y, x));
  const double contrast = cur(y, x) + 0.5 * grad.dot(off);
  if (std::abs(contrast) < p.contrast_threshold / s) return std::nullopt;

  const double c2 = 2.0 * cur(y, x);
  const double dxx = cur(y, x + 1) + cur(y, x - 1) - c2;
  const double dyy = cur(y + 1, x) + cur(y - 1, x) - c2;
  const double dxy = 0.25 * (cur(y + 1, x + 1) - cur(y + 1, x - 1) - cur(y - 1, x + 1) + cur(y - 1, x - 1));
  const double tr = dxx + dyy, det = dxx * dyy - dxy * dxy;
  const double r = p.edge_ratio;
  if (det <= 0 || tr * tr * r >= (r + 1) * (r + 1) * det) return std::nullopt;
  return Refined{layer, y, x, off(2), off(1), off(0)};
}

// Dominant gradient orientations around (x, y) in the given Gaussian layer.
std::vector<float> orientations(const Plane& img, int x, int y, float sigma) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  const float sw = kOriSigmaFactor * sigma;
  const int radius = static_cast<int>(std::lround(3.0f * sw));
  std::array<float, kOriBins> hist{};
  for (int dy = -radius; dy <= radius; ++dy) {
    const int yy = y + dy;
    if (yy <= 0 || yy >= h - 1) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int xx = x + dx;
      if (xx <= 0 || xx >= w - 1) continue;
      const float gx = img(yy, xx + 1) - img(yy, xx - 1);
      const float gy = img(yy + 1, xx) - img(yy - 1, xx);
      const float wgt = std::exp(-(dx * dx + dy * dy) / (2.0f * sw * sw));
      float ang = std::atan2(gy, gx);
      if (ang < 0) ang += kTwoPi;
      int bin = static_cast<int>(std::lround(ang * kOriBins / kTwoPi)) % kOriBins;
      hist[bin] += wgt * std::sqrt(gx * gx + gy * gy);
    }
  }
  std::array<float, kOriBins> sm{};
  for (int i = 0; i < kOriBins; ++i) {
    auto at = [&](int j) { return hist[(j + kOriBins) % kOriBins]; };
    sm[i] = (at(i - 2) + at(i + 2)) * (1.0f / 16) + (at(i - 1) + at(i + 1)) * (4.0f / 16) + at(i) * (6.0f / 16);
  }
  const float peak = *std::max_element(sm.begin(), sm.end());
  std::vector<float> out;
  if (peak <= 0) return out;
  for (int i = 0; i < kOriBins; ++i) {
    const float l = sm[(i + kOriBins - 1) % kOriBins], c = sm[i], r = sm[(i + 1) % kOriBins];
    if (c > l && c > r && c >= kOriPeakRatio * peak) {
      float bin = i + 0.5f * (l - r) / (l - 2 * c + r);
      if (bin < 0) bin += kOriBins;
      if (bin >= kOriBins) bin -= kOriBins;
      out.push_back(bin * kTwoPi / kOriBins);
    }
  }
  return out;
}

Eigen::VectorXf describe(const Plane& img, float px, float py, float ori, float sigma, float clamp) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  const int d = kDescWidth, n = kDescBins;
  const float cell = kDescScale * sigma;
  int radius = static_cast<int>(std::lround(cell * std::numbers::sqrt2_v<float> * (d + 1) * 0.5f));
  radius = std::min(radius, static_cast<int>(std::sqrt(double(w) * w + double(h) * h)));
  const float c = std::cos(ori) / cell, s = std::sin(ori) / cell;
  const float exp_scale = -1.0f / (d * d * 0.5f);
  const int x0 = static_cast<int>(std::lround(px)), y0 = static_cast<int>(std::lround(py));

  std::vector<float> hist((d + 2) * (d + 2) * (n + 2), 0.0f);
  auto H = [&](int r, int cc, int o) -> float& { return hist[((r * (d + 2)) + cc) * (n + 2) + o]; };

  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const float u = j * c + i * s;   // along the orientation
      const float v = -j * s + i * c;  // across it
      const float rbin = v + d / 2.0f - 0.5f, cbin = u + d / 2.0f - 0.5f;
      if (rbin <= -1 || rbin >= d || cbin <= -1 || cbin >= d) continue;
      const int yy = y0 + i, xx = x0 + j;
      if (yy <= 0 || yy >= h - 1 || xx <= 0 || xx >= w - 1) continue;
      const float gx = img(yy, xx + 1) - img(yy, xx - 1);
      const float gy = img(yy + 1, xx) - img(yy - 1, xx);
      const float mag = std::sqrt(gx * gx + gy * gy) * std::exp((u * u + v * v) * exp_scale);
      float rel = std::atan2(gy, gx) - ori;
      while (rel < 0) rel += kTwoPi;
      while (rel >= kTwoPi) rel -= kTwoPi;
      const float obin = rel * n / kTwoPi;

      const int r0 = static_cast<int>(std::floor(rbin)), c0 = static_cast<int>(std::floor(cbin));
      int o0 = static_cast<int>(std::floor(obin));
      const float dr = rbin - r0, dc = cbin - c0, dobin = obin - o0;
      if (o0 >= n) o0 -= n;
      for (int a = 0; a <= 1; ++a) {
        const float wr = a ? dr : 1 - dr;
        for (int b = 0; b <= 1; ++b) {
          const float wc = b ? dc : 1 - dc;
          for (int e = 0; e <= 1; ++e) {
            const float wo = e ? dobin : 1 - dobin;
            H(r0 + 1 + a, c0 + 1 + b, o0 + e) += mag * wr * wc * wo;
          }
        }
      }
    }
  }

  Eigen::VectorXf raw(d * d * n);
  for (int r = 0; r < d; ++r) {
    for (int cc = 0; cc < d; ++cc) {
      H(r + 1, cc + 1, 0) += H(r + 1, cc + 1, n);
      H(r + 1, cc + 1, 1) += H(r + 1, cc + 1, n + 1);
      for (int o = 0; o < n; ++o) raw((r * d + cc) * n + o) = H(r + 1, cc + 1, o);
    }
  }
  return clamp_and_renormalize(raw, clamp);
}

}  // namespace

Eigen::VectorXf clamp_and_renormalize(const Eigen::VectorXf& raw, float clamp, Eigen::VectorXf* clamped) {
  Eigen::VectorXf v = raw.cwiseMax(0.0f);
  const double n0 = v.cast<double>().norm();
  if (n0 > 0) v = (v.cast<double>() / n0).cast<float>();
  v = v.cwiseMin(clamp);
  if (clamped) *clamped = v;
  const double n1 = v.cast<double>().norm();
  if (n1 > 0) v = (v.cast<double>() / n1).cast<float>();
  return v;
}

DescriptorSet sift_descriptors(const RgbImage& image, const SiftParams& p) {
  if (std::min(image.width(), image.height()) < 32) {
    throw ValidationError("image too small for SIFT: " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()) + " (minimum side is 32)");
  }
  const int s = p.scales_per_octave;
  const Pyramid pyr = build_pyramid(to_luma(image), p);
  const float prelim = static_cast<float>(0.5 * p.contrast_threshold / s);

  DescriptorSet out;
  std::vector<Eigen::VectorXf> descs;
  for (std::size_t o = 0; o < pyr.dog.size(); ++o) {
    const auto& dog = pyr.dog[o];
    const int h = static_cast<int>(dog[0].rows()), w = static_cast<int>(dog[0].cols());
    const float octave_scale = static_cast<float>(1 << o);
    for (int layer = 1; layer <= s; ++layer) {
      for (int y = kBorder; y < h - kBorder; ++y) {
        for (int x = kBorder; x < w - kBorder; ++x) {
          if (!is_extremum(dog, layer, y, x, prelim)) continue;
          const auto kp = refine(dog, layer, y, x, p);
          if (!kp) continue;
          const float sigma = static_cast<float>(p.sigma * std::pow(2.0, (kp->layer + kp->xi) / s));
          const Plane& g = pyr.gauss[o][kp->layer];
          const float fx = static_cast<float>(kp->x + kp->xc), fy = static_cast<float>(kp->y + kp->xr);
          for (float ori : orientations(g, kp->x, kp->y, sigma)) {
            descs.push_back(describe(g, fx, fy, ori, sigma, p.clamp));
            out.keypoints.push_back({fx * octave_scale, fy * octave_scale, sigma * octave_scale, ori});
          }
        }
      }
    }
  }
  out.descriptors.resize(static_cast<Eigen::Index>(descs.size()), kDescriptorDim);
  for (std::size_t i = 0; i < descs.size(); ++i) out.descriptors.row(static_cast<Eigen::Index>(i)) = descs[i].transpose();
  return out;
}

void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.magic("SFT1");
  w.u32(static_cast<std::uint32_t>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& k = set.keypoints[i];
    w.f32(k.x);
    w.f32(k.y);
    w.f32(k.scale);
    w.f32(k.orientation);
    for (int j = 0; j < kDescriptorDim; ++j) w.f32(set.descriptors(static_cast<Eigen::Index>(i), j));
  }
  w.write_file(path);
}

DescriptorSet load_descriptors(const std::filesystem::path& path, std::string image_id) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic("SFT1");
  const auto count = r.u32();
  r.require(std::size_t{count} * (4 + kDescriptorDim) * 4, "descriptor payload");
  DescriptorSet set;
  set.image_id = std::move(image_id);
  set.keypoints.resize(count);
  set.descriptors.resize(count, kDescriptorDim);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& k = set.keypoints[i];
    k.x = r.f32();
    k.y = r.f32();
    k.scale = r.f32();
    k.orientation = r.f32();
    for (int j = 0; j < kDescriptorDim; ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite descriptor value");
      set.descriptors(i, j) = v;
    }
  }
  r.expect_end();
  return set;
}

}  // namespace tti
