#pragma once

// Ward agglomerative clustering with the nearest-neighbor-chain algorithm.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace tti {

struct Merge {
  std::uint32_t left = 0;   ///< smaller cluster id; leaves are 0..N-1, merge m creates N+m
  std::uint32_t right = 0;
  double height = 0;        ///< Lance-Williams value: 2 * na*nb/(na+nb) * |ca - cb|^2
  std::uint32_t size = 0;   ///< points in the merged cluster

  friend bool operator==(const Merge&, const Merge&) = default;
};

namespace detail {

inline std::size_t condensed_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return n * i - i * (i + 1) / 2 + (j - i - 1);
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(2 * n), next_(static_cast<std::uint32_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  std::uint32_t merge(std::uint32_t a, std::uint32_t b) {
    const std::uint32_t id = next_++;
    parent_[a] = parent_[b] = id;
    return id;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::uint32_t next_;
};

}  // namespace detail

/// Full Ward merge sequence for the rows of `points`, sorted by height with
/// scipy-style cluster ids. Squared Euclidean distances are accumulated in
/// `Scalar`; ties in the chain prefer the previous chain element.
template <typename Derived>
std::vector<Merge> ward_linkage(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n < 2) return {};
  std::vector<Scalar> d(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[detail::condensed_index(n, i, j)] =
          (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm();
    }
  }
  std::vector<std::uint32_t> size(n, 1);
  std::vector<bool> active(n, true);
  struct Raw {
    std::uint32_t a, b;
    Scalar h;
  };
  std::vector<Raw> raw;
  raw.reserve(n - 1);
  std::vector<std::uint32_t> chain;
  chain.reserve(n);

  for (std::size_t step = 0; step < n - 1; ++step) {
    if (chain.empty()) {
      for (std::uint32_t i = 0; i < n; ++i) {
        if (active[i]) {
          chain.push_back(i);
          break;
        }
      }
    }
    std::uint32_t x = 0, y = 0;
    Scalar best{};
    for (;;) {
      x = chain.back();
      best = std::numeric_limits<Scalar>::infinity();
      if (chain.size() > 1) {
        y = chain[chain.size() - 2];
        best = d[detail::condensed_index(n, x, y)];
      }
      for (std::uint32_t i = 0; i < n; ++i) {
        if (!active[i] || i == x) continue;
        const Scalar v = d[detail::condensed_index(n, x, i)];
        if (v < best) {
          best = v;
          y = i;
        }
      }
      if (chain.size() > 1 && y == chain[chain.size() - 2]) break;
      chain.push_back(y);
    }
    chain.pop_back();
    chain.pop_back();
    if (x > y) std::swap(x, y);
    raw.push_back({x, y, best});

    // Cluster y is absorbed into x.
    const Scalar nx = size[x], ny = size[y];
    for (std::uint32_t k = 0; k < n; ++k) {
      if (!active[k] || k == x || k == y) continue;
      const Scalar nk = size[k];
      auto& dkx = d[detail::condensed_index(n, k, x)];
      const Scalar dky = d[detail::condensed_index(n, k, y)];
      dkx = ((nx + nk) * dkx + (ny + nk) * dky - nk * best) / (nx + ny + nk);
    }
    active[y] = false;
    size[x] += size[y];
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a].h < raw[b].h; });

  detail::UnionFind uf(n);
  std::vector<std::uint32_t> csize(2 * n, 1);
  std::vector<Merge> out;
  out.reserve(raw.size());
  for (auto idx : order) {
    const std::uint32_t a = uf.find(raw[idx].a), b = uf.find(raw[idx].b);
    const std::uint32_t id = uf.merge(a, b);
    csize[id] = csize[a] + csize[b];
    out.push_back({std::min(a, b), std::max(a, b), static_cast<double>(raw[idx].h), csize[id]});
  }
  return out;
}

/// Flat labels after applying the first N - n_clusters merges. Labels are
/// numbered by the smallest member row.
inline std::vector<std::uint32_t> cut_tree(const std::vector<Merge>& merges, std::size_t n, std::size_t n_clusters) {
  detail::UnionFind uf(n);
  const std::size_t applied = n >= n_clusters ? n - n_clusters : 0;
  for (std::size_t m = 0; m < applied && m < merges.size(); ++m) uf.merge(uf.find(merges[m].left), uf.find(merges[m].right));
  std::vector<std::uint32_t> labels(n);
  std::vector<std::int64_t> label_of_root(2 * n, -1);
  std::uint32_t next = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto r = uf.find(i);
    if (label_of_root[r] < 0) label_of_root[r] = next++;
    labels[i] = static_cast<std::uint32_t>(label_of_root[r]);
  }
  return labels;
}

}  // namespace tti
