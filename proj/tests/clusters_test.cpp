#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tti/clusters.hpp"
#include "tti/error.hpp"

using namespace tti;

namespace {

EmbeddingMatrix to_embeddings(const Eigen::MatrixXd& m) {
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < m.rows(); ++i) ids.push_back("p" + std::to_string(i));
  return EmbeddingMatrix(ids, m.cast<float>());
}

ImageRecord identity(const std::string& id, Gender g, std::optional<std::string> eth = std::nullopt) {
  return {id, id + ".png", "sd", PromptSpec::identity(g, std::move(eth)), 0};
}

// Model over the given ids/labels with axis-aligned centroids.
ClusterModel manual_model(std::vector<std::string> ids, std::vector<std::uint32_t> labels, std::uint32_t n) {
  ClusterModel m;
  m.n_clusters = n;
  m.ids = std::move(ids);
  m.labels = std::move(labels);
  m.centroids = RowMatrixXf::Identity(n, n);
  return m;
}

}  // namespace

TEST(Ward, MatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pts = fixture::random_unit_rows(40, 6, seed);
    const auto lib = ward_linkage(pts);
    const auto ref = oracle::ward(pts);
    ASSERT_EQ(lib.size(), ref.size());
    for (std::size_t i = 0; i < lib.size(); ++i) {
      EXPECT_EQ(lib[i].left, ref[i].left) << seed << ":" << i;
      EXPECT_EQ(lib[i].right, ref[i].right) << seed << ":" << i;
      EXPECT_EQ(lib[i].size, ref[i].size) << seed << ":" << i;
      EXPECT_NEAR(lib[i].height, ref[i].height, 1e-9 * std::max(1.0, ref[i].height));
    }
  }
}

TEST(Ward, HeightsNonDecreasingAndDeterministic) {
  const auto emb = to_embeddings(fixture::random_unit_rows(120, 10, 4));
  const auto a = ward_cluster(emb, 12);
  const auto b = ward_cluster(emb, 12);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.merges.size(), 119u);
  for (std::size_t i = 1; i < a.merges.size(); ++i) EXPECT_GE(a.merges[i].height, a.merges[i - 1].height);
  for (auto s : a.sizes()) EXPECT_GE(s, 1u);
  for (Eigen::Index c = 0; c < a.centroids.rows(); ++c) EXPECT_NEAR(a.centroids.row(c).norm(), 1.0f, 1e-6);
}

TEST(Ward, AntipodalPairs) {
  Eigen::MatrixXd m(4, 3);
  m << 1, 0.01, 0, -1, 0, 0.01, 1, -0.01, 0, -1, 0, -0.01;
  const auto model = ward_cluster(to_embeddings(m), 2);
  EXPECT_EQ(model.labels[0], model.labels[2]);
  EXPECT_EQ(model.labels[1], model.labels[3]);
  EXPECT_NE(model.labels[0], model.labels[1]);
  EXPECT_EQ(model.labels[0], 0u);
}

TEST(Ward, SingletonCutAndRangeErrors) {
  const auto emb = to_embeddings(fixture::random_unit_rows(9, 4, 1));
  const auto m = ward_cluster(emb, 9);
  for (std::uint32_t i = 0; i < 9; ++i) EXPECT_EQ(m.labels[i], i);
  EXPECT_THROW(ward_cluster(emb, 1), ValidationError);
  EXPECT_THROW(ward_cluster(emb, 10), ValidationError);
}

TEST(Ward, CutTreeLabelsFollowFirstMember) {
  const auto pts = fixture::random_unit_rows(30, 5, 2);
  const auto merges = ward_linkage(pts);
  for (std::size_t n = 1; n <= 30; ++n) {
    const auto labels = cut_tree(merges, 30, n);
    std::uint32_t next = 0;
    for (auto l : labels) {
      EXPECT_LE(l, next);
      if (l == next) ++next;
    }
    EXPECT_EQ(next, n);
  }
}

TEST(Ward, RowsAreRenormalized) {
  Eigen::MatrixXd m = fixture::random_unit_rows(20, 4, 3);
  const auto a = ward_cluster(to_embeddings(m), 4);
  m *= 3.0;
  EXPECT_EQ(ward_cluster(to_embeddings(m), 4).labels, a.labels);
}

TEST(Assign, CentroidsTiesAndScale) {
  ClusterModel m = manual_model({"a", "b"}, {0, 1}, 2);
  m.centroids = RowMatrixXf(2, 2);
  m.centroids << 1, 0, 0, 1;
  RowMatrixXf rows(4, 2);
  rows << 1, 0, 0, 1, 1, 1, 0.2f, 0.9f;
  const EmbeddingMatrix e({"x", "y", "tie", "w"}, rows);
  EXPECT_EQ(assign(m, e), (std::vector<std::uint32_t>{0, 1, 0, 1}));
  RowMatrixXf scaled = rows * 7.5f;
  EXPECT_EQ(assign(m, EmbeddingMatrix({"x", "y", "tie", "w"}, scaled)), assign(m, e));
  EXPECT_THROW(assign(m, EmbeddingMatrix({"z"}, RowMatrixXf::Ones(1, 3))), ValidationError);
}

TEST(Assign, AgreesWithWardOnSeparatedClusters) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0, 0.05);
  const auto centers = fixture::random_unit_rows(6, 12, 10);
  Eigen::MatrixXd pts(180, 12);
  for (int i = 0; i < 180; ++i) {
    for (int j = 0; j < 12; ++j) pts(i, j) = centers(i % 6, j) + g(rng);
  }
  const auto emb = to_embeddings(pts);
  const auto model = ward_cluster(emb, 6);
  const auto re = assign(model, emb);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < re.size(); ++i) agree += re[i] == model.labels[i];
  EXPECT_GE(agree, 0.9 * re.size());
}

TEST(Regions, PureClusterAndHandCounts) {
  const Corpus corpus({identity("w1", Gender::Woman, "Black"), identity("w2", Gender::Woman, "White"),
                       identity("w3", Gender::Woman), identity("m1", Gender::Man, "White"),
                       identity("m2", Gender::NonBinary, "White"), identity("m3", Gender::Unspecified, "Latinx"),
                       identity("m4", Gender::Man, "Latinx")});
  const auto model = manual_model({"w1", "w2", "w3", "m1", "m2", "m3", "m4"}, {0, 0, 0, 1, 1, 1, 1}, 2);
  const std::map<std::string, std::uint32_t> eval{{"e1", 0}, {"e2", 1}, {"e3", 1}, {"e4", 1}};
  const auto s = summarize_regions(model, corpus, eval);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].top_gender, (std::vector<PhraseShare>{{"woman", 100.0}}));
  ASSERT_EQ(s[0].top_ethnicity.size(), 3u);
  EXPECT_EQ(s[0].top_ethnicity[0].phrase, "Black");  // three-way tie, lexicographic
  EXPECT_NEAR(s[0].top_ethnicity[0].pct, 100.0 / 3, 1e-9);
  EXPECT_EQ(s[1].top_gender[0], (PhraseShare{"man", 50.0}));
  EXPECT_EQ(s[1].top_gender[1], (PhraseShare{"non-binary", 25.0}));
  EXPECT_EQ(s[1].top_gender[2], (PhraseShare{"unspecified", 25.0}));
  EXPECT_EQ(s[1].top_ethnicity[0], (PhraseShare{"Latinx", 50.0}));
  EXPECT_EQ(s[1].top_ethnicity[1], (PhraseShare{"White", 50.0}));
  EXPECT_DOUBLE_EQ(s[0].share, 0.25);
  EXPECT_DOUBLE_EQ(s[1].share, 0.75);
  EXPECT_EQ(s[0].members, 3u);
  for (const auto& r : s) {
    double sum = 0;
    for (const auto& p : r.top_gender) sum += p.pct;
    EXPECT_LE(sum, 100.0 + 1e-9);
  }
}

TEST(Regions, SharesSumToOne) {
  const auto emb = to_embeddings(fixture::random_unit_rows(68, 8, 12));
  std::vector<ImageRecord> recs;
  const auto prompts = enumerate_identity_prompts();
  for (std::size_t i = 0; i < prompts.size(); ++i) recs.push_back({emb.ids()[i], "x.png", "sd", prompts[i], 0});
  const Corpus corpus(recs);
  const auto model = ward_cluster(emb, 5);
  const auto eval = assign_map(model, to_embeddings(fixture::random_unit_rows(50, 8, 13)));
  double total = 0;
  for (const auto& r : summarize_regions(model, corpus, eval)) total += r.share;
  EXPECT_NEAR(total, 1.0, 1e-9);
  const auto dist = cluster_distribution(eval, {"p0", "p1", "p2", "nope"}, 5);
  EXPECT_NEAR(std::accumulate(dist.begin(), dist.end(), 0.0), 1.0, 1e-12);
}

TEST(Regions, Table2Selection) {
  const auto t2 = fixture::table2_regions();
  EXPECT_EQ(select_region_group(t2, Attribute::Gender, "woman", 2), (std::set<std::uint32_t>{1, 10, 13, 15}));
  EXPECT_EQ(select_region_group(t2, Attribute::Ethnicity, "Black", 4), (std::set<std::uint32_t>{1, 3, 22}));
  EXPECT_TRUE(select_region_group(t2, Attribute::Ethnicity, "South Asian", 4).empty());
  EXPECT_THROW(select_region_group(t2, Attribute::Gender, "wizard", 2), ValidationError);
  EXPECT_THROW(select_region_group(t2, Attribute::Ethnicity, "Martian", 2), ValidationError);
  for (const std::string phrase : {"woman", "man", "non-binary", "unspecified"}) {
    std::set<std::uint32_t> prev;
    for (std::size_t r = 0; r <= 4; ++r) {
      const auto cur = select_region_group(t2, Attribute::Gender, phrase, r);
      EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
}

TEST(AttributeEntropy, PureUniformAndMixed) {
  std::vector<ImageRecord> recs;
  std::vector<std::string> ids;
  const char* eths[] = {"Black", "White", "Latinx", "South Asian"};
  for (int c = 0; c < 2; ++c) {
    for (int e = 0; e < 4; ++e) {
      const std::string id = "c" + std::to_string(c) + "e" + std::to_string(e);
      recs.push_back(identity(id, c ? Gender::Man : Gender::Woman, eths[e]));
      ids.push_back(id);
    }
  }
  const Corpus corpus(recs);
  const auto m = manual_model(ids, {0, 0, 0, 0, 1, 1, 1, 1}, 2);
  EXPECT_DOUBLE_EQ(attribute_entropy(m, corpus, Attribute::Gender), 0.0);
  EXPECT_DOUBLE_EQ(attribute_entropy(m, corpus, Attribute::Ethnicity), 2.0);
  EXPECT_DOUBLE_EQ(attribute_entropy(m, corpus, Attribute::Joint), 2.0);

  // Cluster 0 = {woman, woman, man}, cluster 1 = {woman x2, man x3}.
  const auto mixed = manual_model(ids, {0, 0, 1, 1, 0, 1, 1, 1}, 2);
  const double h0 = -(2.0 / 3 * std::log2(2.0 / 3) + 1.0 / 3 * std::log2(1.0 / 3));
  const double h1 = -(0.4 * std::log2(0.4) + 0.6 * std::log2(0.6));
  EXPECT_NEAR(attribute_entropy(mixed, corpus, Attribute::Gender), 3.0 / 8 * h0 + 5.0 / 8 * h1, 1e-12);
  EXPECT_THROW(parse_attribute("age"), ValidationError);
  EXPECT_EQ(parse_attribute("joint"), Attribute::Joint);
}

TEST(Model, FileRoundTrip) {
  fixture::TempDir dir("clm");
  auto m = ward_cluster(to_embeddings(fixture::random_unit_rows(30, 6, 7)), 4);
  m.provenance = "test";
  save_model(m, dir / "m.clm");
  EXPECT_EQ(load_model(dir / "m.clm"), m);
  EXPECT_EQ(m.source_hash, embedding_hash(to_embeddings(fixture::random_unit_rows(30, 6, 7))));
}
