#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tti/audit.hpp"
#include "tti/binary_io.hpp"
#include "tti/clusters.hpp"
#include "tti/error.hpp"

using namespace tti;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

AuditConfig parse(const std::string& text, const fs::path& base = {}) {
  std::istringstream in(text);
  return parse_config(in, base);
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndRelativePaths) {
  const auto c = parse(
      "# audit\n"
      "corpus = data/manifest.jsonl   # trailing comment\n"
      "embeddings = \"/abs/e.emb\"\n"
      "n_clusters = 12\n"
      "diversity_level = 0.9\n"
      "bootstrap_b = 250\n"
      "seed = 5\n"
      "ethnicity_phrase = South Asian\n"
      "quintiles = no\n"
      "canonical = true\n",
      "/base");
  EXPECT_EQ(c.corpus, fs::path("/base/data/manifest.jsonl"));
  EXPECT_EQ(c.embeddings, fs::path("/abs/e.emb"));
  EXPECT_TRUE(c.bls.empty());
  EXPECT_EQ(c.n_clusters, 12u);
  EXPECT_EQ(c.diversity_level, 0.9);
  EXPECT_EQ(c.quintile_level, 0.95);
  EXPECT_EQ(c.bootstrap_b, 250);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.ethnicity_phrase, "South Asian");
  EXPECT_FALSE(c.quintiles);
  EXPECT_TRUE(c.canonical);
}

TEST(Config, Defaults) {
  const AuditConfig c;
  EXPECT_EQ(c.n_clusters, 24u);
  EXPECT_EQ(c.diversity_level, 0.99);
  EXPECT_EQ(c.quintile_level, 0.95);
  EXPECT_EQ(c.bootstrap_b, 1000);
  EXPECT_EQ(c.gender_phrase, "woman");
  EXPECT_EQ(c.gender_rank, 2u);
  EXPECT_EQ(c.ethnicity_phrase, "Black");
  EXPECT_EQ(c.ethnicity_rank, 4u);
}

TEST(Config, ParseErrorsCarryLine) {
  const char* bad[] = {"n_clusters = 8\ncolour = red\n", "n_clusters = 8\n\nseed = -1\n", "quintiles = maybe\n",
                       "just a line\n", "n_clusters = 8x\n"};
  const std::size_t lines[] = {2, 3, 1, 1, 1};
  for (std::size_t i = 0; i < std::size(bad); ++i) {
    try {
      parse(bad[i]);
      FAIL() << bad[i];
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), lines[i]) << bad[i];
    }
  }
}

TEST(Config, HashIgnoresCanonicalAndWorkers) {
  AuditConfig a;
  AuditConfig b = a;
  b.canonical = true;
  b.workers = 4;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 18;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, ValidationHappensBeforeCompute) {
  fixture::TempDir dir("cfg");
  const auto e2e = fixture::write_end_to_end(dir.path());
  auto c = load_config(e2e.config);
  EXPECT_NO_THROW(validate_config(c));

  c.bls = dir / "nope.csv";
  try {
    run_audit(c, dir / "out");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("config: bls"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir / "out"));

  // No BLS path and a plain manifest without a BLS table.
  c.bls.clear();
  try {
    validate_config(c);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("quintiles"), std::string::npos) << e.what();
  }
  c.quintiles = false;
  EXPECT_NO_THROW(validate_config(c));

  c = load_config(e2e.config);
  c.bootstrap_b = 10;
  EXPECT_THROW(validate_config(c), ValidationError);
  c = load_config(e2e.config);
  c.embeddings.clear();
  EXPECT_THROW(validate_config(c), ValidationError);
}

TEST(Audit, BundleContentsAndStamps) {
  fixture::TempDir dir("audit");
  const auto e2e = fixture::write_end_to_end(dir.path());
  const auto c = load_config(e2e.config);
  const auto bundle = run_audit(c, dir / "bundle");
  EXPECT_EQ(bundle_files(dir / "bundle"),
            (std::vector<std::string>{"assignments.json", "diversity.json", "diversity.md", "markers.json",
                                      "markers.md", "model.clm", "provenance.json", "quintiles.json",
                                      "quintiles.md", "regions.json", "regions.md"}));
  for (const char* name : {"assignments", "diversity", "markers", "provenance", "quintiles", "regions"}) {
    const auto doc = read_json(dir / "bundle" / (std::string(name) + ".json"));
    EXPECT_EQ(doc.at("config_hash"), c.hash()) << name;
    EXPECT_EQ(doc.at("seeds").at("bootstrap"), 17) << name;
    EXPECT_EQ(doc.at("report"), name);
  }
  for (const char* md : {"regions.md", "diversity.md", "quintiles.md", "markers.md"}) {
    std::ifstream f(dir / "bundle" / md);
    std::stringstream ss;
    ss << f.rdbuf();
    EXPECT_NE(ss.str().find(c.hash()), std::string::npos) << md;
  }

  const auto& prov = bundle.provenance;
  EXPECT_FALSE(prov.contains("created_at"));
  std::vector<std::string> stages;
  for (const auto& s : prov.at("stages")) {
    stages.push_back(s.at("name"));
    EXPECT_EQ(s.at("status"), "ok");
  }
  EXPECT_EQ(stages, (std::vector<std::string>{"load", "cluster", "assign", "summarize", "diversity", "quintiles",
                                              "markers"}));
  EXPECT_EQ(prov.at("inputs").at("embeddings").at("fnv1a64"), [&] {
    const auto bytes = io::read_file_bytes(e2e.embeddings);
    return io::hex64(io::fnv1a64(std::string_view(bytes.data(), bytes.size())));
  }());

  // Every corpus image is assigned.
  EXPECT_EQ(read_json(dir / "bundle" / "assignments.json").at("assignments").size(), 200u);
  const auto model = load_model(dir / "bundle" / "model.clm");
  EXPECT_EQ(model.n_clusters, 8u);
  EXPECT_EQ(model.ids.size(), 136u);

  const auto& regions = bundle.regions.at("regions");
  ASSERT_EQ(regions.size(), 8u);
  double share = 0;
  for (const auto& r : regions) share += r.at("share").get<double>();
  EXPECT_NEAR(share, 1.0, 1e-9);

  for (const char* kind : {"identities", "professions"}) {
    for (const auto& sys : e2e.systems) {
      const auto& d = bundle.diversity.at("datasets").at(kind).at(sys);
      const double h = d.at("entropy_bits");
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, 3.0 + 1e-12);
      EXPECT_LE(d.at("ci_low").get<double>(), h);
      EXPECT_GE(d.at("ci_high").get<double>(), h);
    }
  }
  // Identity prompts spread over every cluster: a uniform 68-image split
  // over 8 clusters has entropy close to 3 bits.
  EXPECT_GT(bundle.diversity.at("datasets").at("identities").at("sysA").at("entropy_bits").get<double>(), 2.0);

  ASSERT_TRUE(bundle.quintiles);
  const auto& analyses = bundle.quintiles->at("analyses");
  ASSERT_EQ(analyses.size(), 2u);
  EXPECT_EQ(analyses[0].at("phrase"), "woman");
  EXPECT_EQ(analyses[1].at("phrase"), "Black");
  // The two BLS-only professions land in the top bin with no images.
  const auto& errata = analyses[0].at("report").at("errata");
  EXPECT_EQ(errata.size(), 4u);

  ASSERT_TRUE(bundle.markers);
  const auto& caption = bundle.markers->at("systems").at("sysA").at("caption");
  EXPECT_EQ(caption.at("texts"), 100);
  EXPECT_DOUBLE_EQ(bundle.markers->at("systems").at("sysA").at("pct_profession_mention").get<double>(), 50.0);
}

TEST(Audit, ReproducibleBytes) {
  fixture::TempDir dir("repro");
  const auto e2e = fixture::write_end_to_end(dir.path());
  auto c = load_config(e2e.config);
  run_audit(c, dir / "a");
  c.workers = 3;
  run_audit(c, dir / "b");
  const auto a = fixture::snapshot(dir / "a");
  const auto b = fixture::snapshot(dir / "b");
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, bytes] : a) EXPECT_TRUE(bytes == b.at(name)) << name;
}

TEST(Audit, TimestampOnlyWhenNotCanonical) {
  fixture::TempDir dir("stamp");
  auto c = load_config(fixture::write_end_to_end(dir.path()).config);
  c.canonical = false;
  c.markers = false;
  const auto bundle = run_audit(c, dir / "out");
  EXPECT_TRUE(bundle.provenance.contains("created_at"));
  EXPECT_FALSE(fs::exists(dir / "out" / "markers.json"));
  EXPECT_EQ(bundle.provenance.at("stages").back().at("status"), "skipped");
}

TEST(Audit, StageFailureIsRecorded) {
  fixture::TempDir dir("fail");
  auto c = load_config(fixture::write_end_to_end(dir.path()).config);
  c.n_clusters = 500;
  try {
    run_audit(c, dir / "out");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("stage cluster:", 0), 0u) << e.what();
  }
  const auto prov = read_json(dir / "out" / "provenance.json");
  const auto& last = prov.at("stages").back();
  EXPECT_EQ(last.at("name"), "cluster");
  EXPECT_EQ(last.at("status"), "failed");
  EXPECT_FALSE(last.at("error").get<std::string>().empty());
}
