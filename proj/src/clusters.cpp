#include "tti/clusters.hpp"

#include <algorithm>
#include <cmath>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"

namespace tti {

namespace {

std::vector<PhraseShare> ranked(const std::map<std::string, std::size_t>& counts, std::size_t total) {
  std::vector<PhraseShare> out;
  for (const auto& [phrase, c] : counts) out.push_back({phrase, total ? 100.0 * c / total : 0.0});
  std::stable_sort(out.begin(), out.end(), [](const PhraseShare& a, const PhraseShare& b) { return a.pct > b.pct; });
  return out;
}

double entropy_of(const std::map<std::string, std::size_t>& counts, std::size_t total) {
  double h = 0;
  for (const auto& [_, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

const ImageRecord& member_record(const Corpus& corpus, const std::string& id) {
  const auto* r = corpus.find(id);
  if (!r) throw ValidationError("clustered image \"" + id + "\" is not in the identity corpus");
  return *r;
}

}  // namespace

std::vector<std::size_t> ClusterModel::sizes() const {
  std::vector<std::size_t> s(n_clusters, 0);
  for (auto l : labels) ++s[l];
  return s;
}

std::map<std::string, std::uint32_t> ClusterModel::assignments() const {
  std::map<std::string, std::uint32_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], labels[i]);
  return out;
}

std::string embedding_hash(const EmbeddingMatrix& embeddings) {
  const auto bytes = encode_embeddings(embeddings);
  return io::hex64(io::fnv1a64(std::string_view(bytes.data(), bytes.size())));
}

ClusterModel ward_cluster(const EmbeddingMatrix& embeddings, std::uint32_t n_clusters) {
  const std::size_t n = static_cast<std::size_t>(embeddings.count());
  if (n_clusters < 2 || n_clusters > n) {
    throw ValidationError("n_clusters=" + std::to_string(n_clusters) + " out of range [2, " + std::to_string(n) + "]");
  }
  Eigen::MatrixXd x = embeddings.rows().cast<double>();
  if (!x.allFinite()) throw ValidationError("embeddings contain NaN or Inf");
  x.rowwise().normalize();

  ClusterModel m;
  m.n_clusters = n_clusters;
  m.merges = ward_linkage(x);
  m.ids = embeddings.ids();
  m.labels = cut_tree(m.merges, n, n_clusters);
  m.source_hash = embedding_hash(embeddings);

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_clusters, x.cols());
  for (std::size_t i = 0; i < n; ++i) sums.row(m.labels[i]) += x.row(static_cast<Eigen::Index>(i));
  for (Eigen::Index c = 0; c < sums.rows(); ++c) {
    const double norm = sums.row(c).norm();
    // Antipodal members can cancel exactly; fall back to the first member.
    if (norm > 0) {
      sums.row(c) /= norm;
    } else {
      const auto first = std::find(m.labels.begin(), m.labels.end(), static_cast<std::uint32_t>(c));
      sums.row(c) = x.row(first - m.labels.begin());
    }
  }
  m.centroids = sums.cast<float>();
  return m;
}

std::vector<std::uint32_t> assign(const ClusterModel& model, const EmbeddingMatrix& embeddings) {
  if (embeddings.count() > 0 && embeddings.dim() != model.centroids.cols()) {
    throw ValidationError("embedding dimension " + std::to_string(embeddings.dim()) + " does not match model " +
                          std::to_string(model.centroids.cols()));
  }
  const Eigen::MatrixXd c = model.centroids.cast<double>();
  std::vector<std::uint32_t> out(static_cast<std::size_t>(embeddings.count()));
  for (Eigen::Index i = 0; i < embeddings.count(); ++i) {
    const Eigen::VectorXd v = embeddings.rows().row(i).cast<double>().normalized();
    const Eigen::VectorXd dots = c * v;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < dots.size(); ++j) {
      if (dots(j) > dots(best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
  }
  return out;
}

std::map<std::string, std::uint32_t> assign_map(const ClusterModel& model, const EmbeddingMatrix& embeddings) {
  const auto labels = assign(model, embeddings);
  std::map<std::string, std::uint32_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.emplace(embeddings.ids()[i], labels[i]);
  return out;
}

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::Gender: return "gender";
    case Attribute::Ethnicity: return "ethnicity";
    case Attribute::Joint: return "joint";
  }
  return "gender";
}

Attribute parse_attribute(std::string_view s) {
  if (s == "gender") return Attribute::Gender;
  if (s == "ethnicity") return Attribute::Ethnicity;
  if (s == "joint") return Attribute::Joint;
  throw ValidationError("unknown attribute \"" + std::string(s) + "\" (expected gender, ethnicity or joint)");
}

std::string attribute_phrase(const PromptSpec& prompt, Attribute a) {
  switch (a) {
    case Attribute::Gender: return std::string(gender_phrase(prompt.gender));
    case Attribute::Ethnicity: return prompt.ethnicity_phrase();
    case Attribute::Joint: return std::string(gender_phrase(prompt.gender)) + " / " + prompt.ethnicity_phrase();
  }
  return {};
}

std::vector<RegionSummary> summarize_regions(const ClusterModel& model, const Corpus& identity_corpus,
                                             const std::map<std::string, std::uint32_t>& eval_assignments) {
  std::vector<std::map<std::string, std::size_t>> gender(model.n_clusters), eth(model.n_clusters);
  std::vector<std::size_t> members(model.n_clusters, 0), assigned(model.n_clusters, 0);
  for (std::size_t i = 0; i < model.ids.size(); ++i) {
    const auto& r = member_record(identity_corpus, model.ids[i]);
    const auto c = model.labels[i];
    ++members[c];
    ++gender[c][attribute_phrase(r.prompt, Attribute::Gender)];
    ++eth[c][attribute_phrase(r.prompt, Attribute::Ethnicity)];
  }
  for (const auto& [id, c] : eval_assignments) {
    if (c >= model.n_clusters) throw ValidationError("assignment of \"" + id + "\" to unknown cluster");
    ++assigned[c];
  }
  std::vector<RegionSummary> out;
  for (std::uint32_t c = 0; c < model.n_clusters; ++c) {
    RegionSummary s;
    s.cluster = c;
    s.members = members[c];
    s.share = eval_assignments.empty() ? 0.0 : static_cast<double>(assigned[c]) / eval_assignments.size();
    s.top_gender = ranked(gender[c], members[c]);
    s.top_ethnicity = ranked(eth[c], members[c]);
    out.push_back(std::move(s));
  }
  return out;
}

std::set<std::uint32_t> select_region_group(const std::vector<RegionSummary>& summaries, Attribute attribute,
                                            std::string_view phrase, std::size_t rank_max) {
  bool known = phrase == "unspecified";
  if (attribute == Attribute::Gender) {
    for (auto g : {Gender::Man, Gender::Woman, Gender::NonBinary}) known |= gender_phrase(g) == phrase;
  } else if (attribute == Attribute::Ethnicity) {
    for (auto e : identity_ethnicities()) known |= e == phrase;
  } else {
    throw ValidationError("region groups are selected by gender or ethnicity");
  }
  if (!known) {
    throw ValidationError("unknown " + std::string(to_string(attribute)) + " phrase \"" + std::string(phrase) + "\"");
  }
  std::set<std::uint32_t> out;
  for (const auto& s : summaries) {
    const auto& list = attribute == Attribute::Gender ? s.top_gender : s.top_ethnicity;
    for (std::size_t r = 0; r < list.size() && r < rank_max; ++r) {
      if (list[r].phrase == phrase && list[r].pct > 0) out.insert(s.cluster);
    }
  }
  return out;
}

double attribute_entropy(const ClusterModel& model, const Corpus& identity_corpus, Attribute attribute) {
  std::vector<std::map<std::string, std::size_t>> counts(model.n_clusters);
  std::vector<std::size_t> members(model.n_clusters, 0);
  for (std::size_t i = 0; i < model.ids.size(); ++i) {
    const auto& r = member_record(identity_corpus, model.ids[i]);
    ++counts[model.labels[i]][attribute_phrase(r.prompt, attribute)];
    ++members[model.labels[i]];
  }
  double h = 0;
  const double n = static_cast<double>(model.ids.size());
  for (std::uint32_t c = 0; c < model.n_clusters; ++c) {
    if (members[c]) h += members[c] / n * entropy_of(counts[c], members[c]);
  }
  return h;
}

std::vector<double> cluster_distribution(const std::map<std::string, std::uint32_t>& assignments,
                                         const std::vector<std::string>& image_ids, std::uint32_t n_clusters) {
  std::vector<double> out(n_clusters, 0.0);
  std::size_t total = 0;
  for (const auto& id : image_ids) {
    auto it = assignments.find(id);
    if (it == assignments.end()) continue;
    if (it->second >= n_clusters) throw ValidationError("assignment of \"" + id + "\" to unknown cluster");
    out[it->second] += 1;
    ++total;
  }
  if (total) {
    for (auto& v : out) v /= static_cast<double>(total);
  }
  return out;
}

void save_model(const ClusterModel& m, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.magic("CLM1");
  w.u32(m.n_clusters);
  w.u32(static_cast<std::uint32_t>(m.ids.size()));
  w.u32(static_cast<std::uint32_t>(m.centroids.cols()));
  for (const auto& mg : m.merges) {
    w.u32(mg.left);
    w.u32(mg.right);
    w.f64(mg.height);
    w.u32(mg.size);
  }
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    w.short_string(m.ids[i]);
    w.u32(m.labels[i]);
  }
  for (Eigen::Index i = 0; i < m.centroids.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.centroids.cols(); ++j) w.f32(m.centroids(i, j));
  }
  w.short_string(m.source_hash);
  w.short_string(m.provenance);
  w.write_file(path);
}

ClusterModel load_model(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic("CLM1");
  ClusterModel m;
  m.n_clusters = r.u32();
  const auto n = r.u32(), dim = r.u32();
  if (n < 2 || m.n_clusters < 2 || m.n_clusters > n || dim == 0) {
    throw FormatError(path.string() + ": invalid model header");
  }
  r.require(std::size_t{n - 1} * 20, "merge tree");
  for (std::uint32_t i = 0; i + 1 < n; ++i) {
    Merge mg;
    mg.left = r.u32();
    mg.right = r.u32();
    mg.height = r.f64();
    mg.size = r.u32();
    m.merges.push_back(mg);
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    m.ids.push_back(r.short_string());
    const auto label = r.u32();
    if (label >= m.n_clusters) throw FormatError(path.string() + ": label out of range");
    m.labels.push_back(label);
  }
  r.require(std::size_t{m.n_clusters} * dim * 4, "centroids");
  m.centroids.resize(m.n_clusters, dim);
  for (std::uint32_t i = 0; i < m.n_clusters; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) m.centroids(i, j) = r.f32();
  }
  m.source_hash = r.short_string();
  m.provenance = r.short_string();
  r.expect_end();
  return m;
}

}  // namespace tti
