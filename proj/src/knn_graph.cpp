#include "tti/knn_graph.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <queue>
#include <random>
#include <unordered_set>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"
#include "tti/parallel.hpp"

namespace tti {

namespace {

struct Entry {
  std::uint32_t index;
  double sim;
  bool fresh;
};

bool better(double sa, std::uint32_t ia, double sb, std::uint32_t ib) {
  return sa > sb || (sa == sb && ia < ib);
}

// Fixed-size neighbor list kept sorted best-first.
class Heap {
 public:
  explicit Heap(int k) : k_(k) { items_.reserve(k); }

  // Returns true when the list changed.
  bool push(std::uint32_t idx, double sim, bool fresh) {
    if (static_cast<int>(items_.size()) == k_) {
      const auto& w = items_.back();
      if (!better(sim, idx, w.sim, w.index)) return false;
    }
    for (const auto& e : items_) {
      if (e.index == idx) return false;
    }
    auto pos = std::find_if(items_.begin(), items_.end(),
                            [&](const Entry& e) { return better(sim, idx, e.sim, e.index); });
    items_.insert(pos, Entry{idx, sim, fresh});
    if (static_cast<int>(items_.size()) > k_) items_.pop_back();
    return true;
  }

  std::vector<Entry>& items() { return items_; }
  const std::vector<Entry>& items() const { return items_; }

 private:
  int k_;
  std::vector<Entry> items_;
};

template <typename T>
void sample_into(std::vector<T>& v, std::size_t n, std::mt19937_64& rng) {
  if (v.size() <= n) return;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (v.size() - i));
    std::swap(v[i], v[j]);
  }
  v.resize(n);
}

std::vector<Hit> finish(std::vector<Hit> hits, int k) {
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
  });
  if (static_cast<int>(hits.size()) > k) hits.resize(k);
  return hits;
}

void check_k(int k, std::size_t available) {
  if (k < 1 || static_cast<std::size_t>(k) > available) {
    throw ValidationError("k=" + std::to_string(k) + " out of range; at most " + std::to_string(available) +
                          " neighbors available");
  }
}

std::vector<Hit> search(const KnnGraph& graph, const VectorSet& vectors, const SparseVec& probe,
                        std::vector<std::uint32_t> seeds, std::optional<std::uint32_t> self,
                        const QueryParams& p) {
  const int pool = p.pool > 0 ? std::max(p.pool, p.k) : std::max(p.k, graph.k());
  std::vector<bool> visited(graph.size(), false);
  if (self) visited[*self] = true;

  struct Cand {
    double sim;
    std::uint32_t idx;
  };
  auto worse_first = [](const Cand& a, const Cand& b) { return better(a.sim, a.idx, b.sim, b.idx); };
  auto best_first = [](const Cand& a, const Cand& b) { return better(b.sim, b.idx, a.sim, a.idx); };
  std::priority_queue<Cand, std::vector<Cand>, decltype(best_first)> frontier(best_first);
  std::priority_queue<Cand, std::vector<Cand>, decltype(worse_first)> results(worse_first);

  auto visit = [&](std::uint32_t i) {
    if (visited[i]) return;
    visited[i] = true;
    const Cand c{cosine(probe, vectors.vectors[i]), i};
    if (static_cast<int>(results.size()) < pool) {
      results.push(c);
      frontier.push(c);
    } else if (better(c.sim, c.idx, results.top().sim, results.top().idx)) {
      results.pop();
      results.push(c);
      frontier.push(c);
    }
  };
  for (auto s : seeds) visit(s);
  while (!frontier.empty()) {
    const Cand c = frontier.top();
    frontier.pop();
    if (static_cast<int>(results.size()) >= pool &&
        better(results.top().sim, results.top().idx, c.sim, c.idx)) {
      break;
    }
    for (const auto& n : graph.neighbors(c.idx)) visit(n.index);
  }
  std::vector<Hit> hits;
  while (!results.empty()) {
    hits.push_back({graph.ids()[results.top().idx], results.top().sim});
    results.pop();
  }
  return finish(std::move(hits), p.k);
}

void check_vectors(const KnnGraph& graph, const VectorSet& vectors) {
  if (vectors.size() != graph.size() || vectors.ids != graph.ids()) {
    throw ValidationError("vector set does not match the index ids");
  }
}

}  // namespace

KnnGraph::KnnGraph(std::vector<std::string> ids, int k, std::uint64_t seed, std::vector<Neighbor> edges)
    : ids_(std::move(ids)), k_(k), seed_(seed), edges_(std::move(edges)) {
  if (k_ < 1 || edges_.size() != ids_.size() * static_cast<std::size_t>(k_)) {
    throw ValidationError("graph edge table does not have degree " + std::to_string(k_));
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto nb = neighbors(i);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      if (nb[j].index >= ids_.size() || nb[j].index == i) throw ValidationError("invalid edge at node " + ids_[i]);
      if (!(nb[j].similarity >= 0.0f && nb[j].similarity <= 1.0f)) {
        throw ValidationError("similarity out of [0,1] at node " + ids_[i]);
      }
      if (j > 0 && !better(nb[j - 1].similarity, nb[j - 1].index, nb[j].similarity, nb[j].index)) {
        throw ValidationError("neighbor list of " + ids_[i] + " is not sorted or has duplicates");
      }
    }
  }
}

std::optional<std::size_t> KnnGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return i;
  }
  return std::nullopt;
}

KnnGraph build_index(const VectorSet& vectors, const NnDescentParams& p, NnDescentStats* stats) {
  const std::size_t n = vectors.size();
  const int K = p.k;
  if (K < 1) throw ValidationError("graph degree k must be at least 1");
  if (n < static_cast<std::size_t>(K) + 1) {
    throw ValidationError("need at least k+1=" + std::to_string(K + 1) + " vectors, got " + std::to_string(n));
  }
  for (const auto& v : vectors.vectors) {
    if (v.size() != vectors.dim) throw ValidationError("vector dimension mismatch in vector set");
  }
  std::mt19937_64 rng(p.seed);
  std::vector<Heap> lists(n, Heap(K));
  for (std::size_t v = 0; v < n; ++v) {
    while (static_cast<int>(lists[v].items().size()) < K) {
      const auto u = static_cast<std::uint32_t>(rng() % n);
      if (u == v) continue;
      lists[v].push(u, cosine(vectors.vectors[v], vectors.vectors[u]), true);
    }
  }

  const std::size_t sample = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p.sample_rate * K)));
  std::vector<std::mutex> locks(p.workers > 1 ? n : 0);
  if (stats) *stats = {};

  for (int iter = 0; iter < p.max_iters; ++iter) {
    std::vector<std::vector<std::uint32_t>> olds(n), news(n), rold(n), rnew(n);
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<std::size_t> fresh_pos;
      for (std::size_t j = 0; j < lists[v].items().size(); ++j) {
        const auto& e = lists[v].items()[j];
        if (e.fresh) {
          fresh_pos.push_back(j);
        } else {
          olds[v].push_back(e.index);
        }
      }
      sample_into(fresh_pos, sample, rng);
      std::sort(fresh_pos.begin(), fresh_pos.end());
      for (auto j : fresh_pos) {
        auto& e = lists[v].items()[j];
        news[v].push_back(e.index);
        e.fresh = false;
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      for (auto u : olds[v]) rold[u].push_back(static_cast<std::uint32_t>(v));
      for (auto u : news[v]) rnew[u].push_back(static_cast<std::uint32_t>(v));
    }
    for (std::size_t v = 0; v < n; ++v) {
      sample_into(rold[v], sample, rng);
      sample_into(rnew[v], sample, rng);
      for (auto u : rold[v]) olds[v].push_back(u);
      for (auto u : rnew[v]) news[v].push_back(u);
      auto dedup = [](std::vector<std::uint32_t>& x) {
        std::sort(x.begin(), x.end());
        x.erase(std::unique(x.begin(), x.end()), x.end());
      };
      dedup(olds[v]);
      dedup(news[v]);
    }

    std::vector<std::size_t> counts(n, 0);
    auto update = [&](std::uint32_t a, std::uint32_t b, double s) -> std::size_t {
      if (p.workers > 1) {
        std::lock_guard lock(locks[a]);
        return lists[a].push(b, s, true);
      }
      return lists[a].push(b, s, true);
    };
    parallel_for(n, p.workers, [&](std::size_t v) {
      const auto& nw = news[v];
      const auto& od = olds[v];
      std::size_t c = 0;
      for (std::size_t i = 0; i < nw.size(); ++i) {
        for (std::size_t j = i + 1; j < nw.size(); ++j) {
          const double s = cosine(vectors.vectors[nw[i]], vectors.vectors[nw[j]]);
          c += update(nw[i], nw[j], s);
          c += update(nw[j], nw[i], s);
        }
        for (auto u : od) {
          if (u == nw[i]) continue;
          const double s = cosine(vectors.vectors[nw[i]], vectors.vectors[u]);
          c += update(nw[i], u, s);
          c += update(u, nw[i], s);
        }
      }
      counts[v] = c;
    });
    std::size_t updates = 0;
    for (auto c : counts) updates += c;
    if (stats) {
      stats->iterations = iter + 1;
      stats->updates.push_back(updates);
    }
    if (static_cast<double>(updates) < p.delta * static_cast<double>(n) * K) break;
  }

  std::vector<Neighbor> edges;
  edges.reserve(n * K);
  for (const auto& l : lists) {
    for (const auto& e : l.items()) edges.push_back({e.index, static_cast<float>(e.sim)});
  }
  // Rounding to f32 can create ties; restore (similarity desc, index asc).
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(edges.begin() + v * K, edges.begin() + (v + 1) * K, [](const Neighbor& a, const Neighbor& b) {
      return better(a.similarity, a.index, b.similarity, b.index);
    });
  }
  return KnnGraph(vectors.ids, K, p.seed, std::move(edges));
}

std::vector<Hit> query(const KnnGraph& graph, const VectorSet& vectors, std::string_view probe_id,
                       const QueryParams& p) {
  check_vectors(graph, vectors);
  const auto self = graph.index_of(probe_id);
  if (!self) throw NotFoundError("unknown image id \"" + std::string(probe_id) + "\"");
  check_k(p.k, graph.size() - 1);
  std::vector<std::uint32_t> seeds;
  for (const auto& nb : graph.neighbors(*self)) seeds.push_back(nb.index);
  return search(graph, vectors, vectors.vectors[*self], std::move(seeds), static_cast<std::uint32_t>(*self), p);
}

std::vector<Hit> query(const KnnGraph& graph, const VectorSet& vectors, const SparseVec& probe,
                       const QueryParams& p) {
  check_vectors(graph, vectors);
  if (probe.size() != vectors.dim) throw ValidationError("probe dimension does not match the index");
  check_k(p.k, graph.size());
  std::mt19937_64 rng(p.seed);
  std::vector<std::uint32_t> seeds;
  const auto n = graph.size();
  const auto want = p.entry_points > 0 ? static_cast<std::size_t>(p.entry_points)
                                       : std::max<std::size_t>(8, static_cast<std::size_t>(4 * std::sqrt(double(n))));
  for (std::size_t i = 0; i < std::min(want, n); ++i) seeds.push_back(static_cast<std::uint32_t>(rng() % n));
  return search(graph, vectors, probe, std::move(seeds), std::nullopt, p);
}

std::vector<Hit> brute_force_knn(const VectorSet& vectors, const SparseVec& probe, int k) {
  check_k(k, vectors.size());
  std::vector<Hit> hits;
  hits.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) hits.push_back({vectors.ids[i], cosine(probe, vectors.vectors[i])});
  return finish(std::move(hits), k);
}

std::vector<Hit> brute_force_knn(const VectorSet& vectors, std::string_view probe_id, int k) {
  const auto it = std::find(vectors.ids.begin(), vectors.ids.end(), probe_id);
  if (it == vectors.ids.end()) throw NotFoundError("unknown image id \"" + std::string(probe_id) + "\"");
  check_k(k, vectors.size() - 1);
  const auto& probe = vectors.vectors[it - vectors.ids.begin()];
  std::vector<Hit> hits;
  hits.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors.ids[i] != probe_id) hits.push_back({vectors.ids[i], cosine(probe, vectors.vectors[i])});
  }
  return finish(std::move(hits), k);
}

std::vector<std::string> colorfulness_neighbors(const std::map<std::string, double>& scores,
                                                std::string_view probe_id, int k) {
  const auto probe = scores.find(std::string(probe_id));
  if (probe == scores.end()) throw NotFoundError("unknown image id \"" + std::string(probe_id) + "\"");
  check_k(k, scores.size() - 1);
  std::vector<std::pair<double, const std::string*>> d;
  d.reserve(scores.size());
  for (const auto& [id, s] : scores) {
    if (id != probe->first) d.push_back({std::abs(s - probe->second), &id});
  }
  // std::map iteration is in id order, so a stable sort keeps the tie rule.
  std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) out.push_back(*d[i].second);
  return out;
}

void save_graph(const KnnGraph& graph, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.magic("KNN1");
  w.u32(static_cast<std::uint32_t>(graph.size()));
  w.u32(static_cast<std::uint32_t>(graph.k()));
  w.u64(graph.seed());
  for (const auto& id : graph.ids()) w.short_string(id);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (const auto& nb : graph.neighbors(i)) {
      w.u32(nb.index);
      w.f32(nb.similarity);
    }
  }
  w.write_file(path);
}

KnnGraph load_graph(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic("KNN1");
  const auto n = r.u32(), k = r.u32();
  const auto seed = r.u64();
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back(r.short_string());
  r.require(std::size_t{n} * k * 8, "edge table");
  std::vector<Neighbor> edges(std::size_t{n} * k);
  for (auto& e : edges) {
    e.index = r.u32();
    e.similarity = r.f32();
  }
  r.expect_end();
  try {
    return KnnGraph(std::move(ids), static_cast<int>(k), seed, std::move(edges));
  } catch (const ValidationError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace tti
