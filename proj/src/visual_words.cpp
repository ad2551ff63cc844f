#include "tti/visual_words.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"
#include "tti/parallel.hpp"

namespace tti {

namespace {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Eigen::Index kChunk = 2048;

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ChunkResult {
  RowMatrixXd sums;
  std::vector<Eigen::Index> counts;
  double inertia = 0;
  std::size_t changed = 0;
};

// Argmin over rows of C of |x - c|^2 computed as |c|^2 - 2 x.c; exact ties
// resolve to the lowest index because the scan keeps the first minimum.
void assign_block(const RowMatrixXd& X, Eigen::Index begin, Eigen::Index end, const RowMatrixXd& C,
                  const Eigen::VectorXd& cnorm, std::uint32_t* labels, double* inertia) {
  const RowMatrixXd G = X.middleRows(begin, end - begin) * C.transpose();
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < C.rows(); ++c) {
      const double d = cnorm(c) - 2.0 * G(i, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[i] = static_cast<std::uint32_t>(best);
    if (inertia) *inertia += std::max(0.0, best_d + X.row(begin + i).squaredNorm());
  }
}

RowMatrixXd seed_plus_plus(const RowMatrixXd& X, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Index n = X.rows();
  RowMatrixXd C(k, X.cols());
  std::vector<bool> taken(n, false);
  Eigen::Index first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  C.row(0) = X.row(first);
  taken[first] = true;
  Eigen::VectorXd d2 = (X.rowwise() - C.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0) {
      const double target = unit_draw(rng) * total;
      double acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (d2(i) > 0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Fewer distinct points than k: take the next unused row.
      const Eigen::Index start = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index i = (start + j) % n;
        if (!taken[i]) {
          pick = i;
          break;
        }
      }
    }
    C.row(c) = X.row(pick);
    taken[pick] = true;
    d2 = d2.cwiseMin((X.rowwise() - C.row(c)).rowwise().squaredNorm());
  }
  return C;
}

}  // namespace

KMeansResult kmeans(const RowMatrixXf& points, int k, std::uint64_t seed, int max_iter, unsigned workers) {
  if (k < 2) throw ValidationError("k must be at least 2, got " + std::to_string(k));
  if (points.rows() < k) {
    throw ValidationError("need at least k=" + std::to_string(k) + " descriptors, got " +
                          std::to_string(points.rows()));
  }
  if (!points.allFinite()) throw ValidationError("k-means input has non-finite values");
  const RowMatrixXd X = points.cast<double>();
  const Eigen::Index n = X.rows(), dim = X.cols();
  RowMatrixXd C = seed_plus_plus(X, k, seed);

  KMeansResult res;
  res.labels.assign(n, std::numeric_limits<std::uint32_t>::max());
  const std::size_t n_chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  std::vector<ChunkResult> chunks(n_chunks);

  for (int iter = 0; iter < std::max(1, max_iter); ++iter) {
    const Eigen::VectorXd cnorm = C.rowwise().squaredNorm();
    parallel_for(n_chunks, workers, [&](std::size_t ci) {
      const Eigen::Index b = static_cast<Eigen::Index>(ci) * kChunk, e = std::min(n, b + kChunk);
      auto& ch = chunks[ci];
      std::vector<std::uint32_t> lab(e - b);
      ch.inertia = 0;
      assign_block(X, b, e, C, cnorm, lab.data(), &ch.inertia);
      ch.sums = RowMatrixXd::Zero(k, dim);
      ch.counts.assign(k, 0);
      ch.changed = 0;
      for (Eigen::Index i = b; i < e; ++i) {
        const auto l = lab[i - b];
        if (res.labels[i] != l) ++ch.changed;
        res.labels[i] = l;
        ch.sums.row(l) += X.row(i);
        ++ch.counts[l];
      }
    });
    double inertia = 0;
    std::size_t changed = 0;
    RowMatrixXd sums = RowMatrixXd::Zero(k, dim);
    std::vector<Eigen::Index> counts(k, 0);
    for (const auto& ch : chunks) {
      inertia += ch.inertia;
      changed += ch.changed;
      sums += ch.sums;
      for (int c = 0; c < k; ++c) counts[c] += ch.counts[c];
    }
    res.inertia_trace.push_back(inertia);
    res.iterations = iter + 1;
    if (changed == 0) {
      res.converged = true;
      break;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) C.row(c) = sums.row(c) / static_cast<double>(counts[c]);
    }
  }
  res.centroids = C.cast<float>();
  return res;
}

Codebook train_codebook(std::span<const DescriptorSet> sets, int k, std::uint64_t seed, int max_iter,
                        unsigned workers) {
  Eigen::Index total = 0;
  for (const auto& s : sets) total += s.descriptors.rows();
  RowMatrixXf all(total, kDescriptorDim);
  Eigen::Index at = 0;
  for (const auto& s : sets) {
    all.middleRows(at, s.descriptors.rows()) = s.descriptors;
    at += s.descriptors.rows();
  }
  auto km = kmeans(all, k, seed, max_iter, workers);
  Codebook cb;
  cb.centroids = std::move(km.centroids);
  cb.seed = seed;
  cb.inertia = km.inertia_trace.empty() ? 0.0 : km.inertia_trace.back();
  return cb;
}

std::uint32_t nearest_word(const Eigen::Ref<const Eigen::RowVectorXf>& x, const RowMatrixXf& centroids) {
  if (x.size() != centroids.cols()) throw ValidationError("descriptor dimension does not match codebook");
  const Eigen::RowVectorXd xd = x.cast<double>();
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c).cast<double>() - xd).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

std::vector<std::uint32_t> word_counts(const DescriptorMatrix& descriptors, const RowMatrixXf& centroids) {
  std::vector<std::uint32_t> counts(centroids.rows(), 0);
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) ++counts[nearest_word(descriptors.row(i), centroids)];
  return counts;
}

Eigen::VectorXf compute_idf(std::span<const std::vector<std::uint32_t>> counts, int k) {
  if (counts.empty()) throw ValidationError("idf needs at least one image");
  std::vector<std::size_t> df(k, 0);
  for (const auto& c : counts) {
    if (static_cast<int>(c.size()) != k) throw ValidationError("word count vector length does not match k");
    for (int w = 0; w < k; ++w) df[w] += c[w] > 0;
  }
  const double n = static_cast<double>(counts.size());
  Eigen::VectorXf idf(k);
  for (int w = 0; w < k; ++w) idf(w) = static_cast<float>(std::log((1.0 + n) / (1.0 + df[w])) + 1.0);
  return idf;
}

SparseVec tfidf(std::span<const std::uint32_t> counts, const Eigen::VectorXf& idf) {
  if (static_cast<Eigen::Index>(counts.size()) != idf.size()) {
    throw ValidationError("idf length " + std::to_string(idf.size()) + " does not match codebook size " +
                          std::to_string(counts.size()));
  }
  SparseVec v(idf.size());
  double norm2 = 0;
  for (std::size_t w = 0; w < counts.size(); ++w) {
    if (counts[w] == 0) continue;
    const double val = counts[w] * static_cast<double>(idf(w));
    norm2 += val * val;
    v.insertBack(static_cast<Eigen::Index>(w)) = val;
  }
  if (norm2 > 0) v /= std::sqrt(norm2);
  return v;
}

SparseVec vectorize(const DescriptorMatrix& descriptors, const Codebook& codebook, const Eigen::VectorXf& idf) {
  if (idf.size() != codebook.k()) throw ValidationError("idf length does not match codebook size");
  return tfidf(word_counts(descriptors, codebook.centroids), idf);
}

double cosine(const SparseVec& a, const SparseVec& b) {
  if (a.size() != b.size()) {
    throw ValidationError("vector dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  if (a.nonZeros() == 0 || b.nonZeros() == 0) return 0.0;
  return std::clamp(a.dot(b), 0.0, 1.0);
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
  if (cb.idf.size() != cb.k()) throw ValidationError("codebook has no idf weights");
  io::ByteWriter w;
  w.magic("CBK1");
  w.u32(static_cast<std::uint32_t>(cb.k()));
  w.u32(static_cast<std::uint32_t>(cb.dim()));
  w.u64(cb.seed);
  for (int i = 0; i < cb.k(); ++i) {
    for (int j = 0; j < cb.dim(); ++j) w.f32(cb.centroids(i, j));
  }
  for (int i = 0; i < cb.k(); ++i) w.f32(cb.idf(i));
  w.write_file(path);
}

Codebook load_codebook(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic("CBK1");
  const auto k = r.u32(), dim = r.u32();
  if (k < 2 || dim == 0) throw FormatError(path.string() + ": invalid codebook shape");
  Codebook cb;
  cb.seed = r.u64();
  r.require((std::size_t{k} * dim + k) * 4, "codebook payload");
  cb.centroids.resize(k, dim);
  for (std::uint32_t i = 0; i < k; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) cb.centroids(i, j) = r.f32();
  }
  cb.idf.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) cb.idf(i) = r.f32();
  r.expect_end();
  if (!cb.centroids.allFinite() || !cb.idf.allFinite()) throw FormatError(path.string() + ": non-finite values");
  return cb;
}

void save_vectors(const VectorSet& set, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.magic("SPV1");
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u32(static_cast<std::uint32_t>(set.dim));
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.short_string(set.ids[i]);
    const auto& v = set.vectors[i];
    w.u32(static_cast<std::uint32_t>(v.nonZeros()));
    for (SparseVec::InnerIterator it(v); it; ++it) {
      w.u32(static_cast<std::uint32_t>(it.index()));
      w.f64(it.value());
    }
  }
  w.write_file(path);
}

VectorSet load_vectors(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic("SPV1");
  const auto count = r.u32();
  VectorSet set;
  set.dim = static_cast<int>(r.u32());
  set.ids.reserve(count);
  set.vectors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    set.ids.push_back(r.short_string());
    const auto nnz = r.u32();
    r.require(std::size_t{nnz} * 12, "sparse vector entries");
    SparseVec v(set.dim);
    v.reserve(nnz);
    std::int64_t last = -1;
    for (std::uint32_t j = 0; j < nnz; ++j) {
      const auto idx = r.u32();
      const double val = r.f64();
      if (static_cast<std::int64_t>(idx) <= last || idx >= static_cast<std::uint32_t>(set.dim) ||
          !std::isfinite(val)) {
        throw FormatError(path.string() + ": malformed sparse vector for \"" + set.ids.back() + "\"");
      }
      last = idx;
      v.insertBack(idx) = val;
    }
    set.vectors.push_back(std::move(v));
  }
  r.expect_end();
  return set;
}

}  // namespace tti
