#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tti/corpus.hpp"
#include "tti/error.hpp"

using namespace tti;

namespace {

std::vector<std::string> golden_lines() {
  std::ifstream in(std::string(TTI_TEST_DATA) + "/prompts.golden");
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string rendered_golden() {
  std::string out;
  for (const auto& p : enumerate_identity_prompts()) out += "identity\t" + p.render() + "\n";
  for (const auto& p : enumerate_profession_prompts()) out += "profession\t" + p.render() + "\n";
  return out;
}

}  // namespace

TEST(Prompts, IdentityCountAndExamples) {
  const auto prompts = enumerate_identity_prompts();
  ASSERT_EQ(prompts.size(), 68u);
  std::set<std::string> texts;
  for (const auto& p : prompts) texts.insert(p.render());
  EXPECT_EQ(texts.size(), 68u);
  EXPECT_TRUE(texts.count("Photo portrait of a Latinx woman at work"));
  EXPECT_TRUE(texts.count("Photo portrait of a person at work"));
  EXPECT_TRUE(texts.count("Photo portrait of a African-American non-binary person at work"));
}

TEST(Prompts, GoldenFileIsByteExact) {
  std::ifstream in(std::string(TTI_TEST_DATA) + "/prompts.golden", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), rendered_golden());
  EXPECT_EQ(golden_lines().size(), 68u + 146u);
}

TEST(Prompts, GrammarHolds) {
  const std::regex identity("Photo portrait of a( [A-Z][A-Za-z -]+)?( (woman|man|non-binary person|person)) at work");
  for (const auto& p : enumerate_identity_prompts()) EXPECT_TRUE(std::regex_match(p.render(), identity)) << p.render();
  const std::regex profession("Photo portrait of a [A-Za-z .&-]+");
  for (const auto& p : enumerate_profession_prompts()) EXPECT_TRUE(std::regex_match(p.render(), profession));
  const std::regex adjective("Photo portrait of a [a-z-]+ person");
  for (const auto& p : enumerate_adjective_prompts()) EXPECT_TRUE(std::regex_match(p.render(), adjective));
}

TEST(Prompts, Professions) {
  const std::vector<std::string> one{"laboratory technician"};
  const auto p = enumerate_profession_prompts(one);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].render(), "Photo portrait of a laboratory technician");
  EXPECT_THROW(enumerate_profession_prompts(std::vector<std::string>{}), ValidationError);
  EXPECT_THROW(enumerate_profession_prompts(std::vector<std::string>{"cook", "cook"}), ValidationError);
  EXPECT_EQ(enumerate_profession_prompts().size(), 146u);
}

TEST(Prompts, AdjectiveCodings) {
  const auto adj = enumerate_adjective_prompts();
  EXPECT_EQ(adj.size(), 20u);
  bool compassionate = false, decisive = false;
  for (const auto& a : adj) {
    ASSERT_TRUE(a.coding.has_value());
    if (a.adjective == "compassionate") compassionate = *a.coding == AdjectiveCoding::F;
    if (a.adjective == "decisive") decisive = *a.coding == AdjectiveCoding::M;
  }
  EXPECT_TRUE(compassionate);
  EXPECT_TRUE(decisive);
}

TEST(Manifest, ThreeLines) {
  std::istringstream in(
      R"({"id":"a","file":"a.png","system":"sd","prompt_kind":"identity","gender":"woman","ethnicity":"Black","seed":0}
{"id":"b","file":"b.png","system":"sd","prompt_kind":"profession","profession":"cook"}
{"id":"c","file":"c.png","system":"dalle","prompt_kind":"adjective","adjective":"gentle","seed":3}
)");
  const auto c = parse_manifest(in);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.at("a").prompt.gender, Gender::Woman);
  EXPECT_EQ(c.at("b").prompt.render(), "Photo portrait of a cook");
  EXPECT_EQ(c.at("c").prompt.coding, AdjectiveCoding::F);
  EXPECT_EQ(c.at("c").seed_index, 3u);
}

TEST(Manifest, ErrorsNameTheLine) {
  std::istringstream missing_id(
      R"({"id":"a","file":"a.png","system":"sd","prompt_kind":"profession","profession":"cook"}
{"file":"b.png","system":"sd","prompt_kind":"profession","profession":"cook"}
)");
  try {
    parse_manifest(missing_id);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("id"), std::string::npos);
  }
  std::istringstream dup(
      R"({"id":"a","file":"a.png","system":"sd","prompt_kind":"profession","profession":"cook"}
{"id":"a","file":"a.png","system":"sd","prompt_kind":"profession","profession":"cook"}
)");
  EXPECT_THROW(parse_manifest(dup), ParseError);
  std::istringstream mixed(R"({"id":"a","file":"a.png","system":"sd","prompt_kind":"identity","profession":"cook"})");
  EXPECT_THROW(parse_manifest(mixed), ParseError);
}

TEST(Manifest, IdentityCorpusCountsPerSystem) {
  std::vector<ImageRecord> recs;
  for (const std::string sys : {"dalle2", "sd14", "sd2"}) {
    for (const auto& p : enumerate_identity_prompts()) {
      for (std::uint32_t s = 0; s < 10; ++s) {
        recs.push_back({sys + "/" + std::to_string(recs.size()), "x.png", sys, p, s});
      }
    }
  }
  const Corpus c(recs);
  std::stringstream ss;
  write_manifest(c, ss);
  const auto back = parse_manifest(ss);
  EXPECT_EQ(back.size(), 2040u);
  for (const auto& [sys, n] : back.count_by_system()) EXPECT_EQ(n, 680u) << sys;
}

TEST(Manifest, RoundTrip) {
  fixture::TempDir dir("corpus");
  const auto e2e = fixture::write_end_to_end(dir.path());
  const auto a = load_manifest(e2e.manifest);
  save_manifest(a, dir / "again.jsonl");
  const auto b = load_manifest(dir / "again.jsonl");
  EXPECT_EQ(a.records(), b.records());
  EXPECT_EQ(a.size(), 200u);
  EXPECT_THROW(a.validate_files(), ValidationError);
}

TEST(Bls, ParsesAndValidates) {
  std::istringstream ok("profession,pct_women,pct_black\nsinger,24.0,11.5\n\"cook, line\",40,17\n");
  const auto t = parse_bls(ok);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(t.find("singer")->pct_women, 24.0);
  EXPECT_DOUBLE_EQ(t.find("cook, line")->pct_black, 17.0);

  std::istringstream range("profession,pct_women,pct_black\nsinger,120,1\n");
  EXPECT_THROW(parse_bls(range), Error);
  std::istringstream dup("profession,pct_women,pct_black\nsinger,1,1\nsinger,2,2\n");
  EXPECT_THROW(parse_bls(dup), Error);
  std::istringstream column("profession,pct_women\nsinger,1\n");
  EXPECT_THROW(parse_bls(column), Error);
}

TEST(Bls, FullListRoundTrip) {
  std::vector<BlsRow> rows;
  int i = 0;
  for (auto p : default_professions()) rows.push_back({std::string(p), (i * 7) % 100 + 0.5, (i * 3) % 40 + 0.25}), ++i;
  const BlsTable t(rows);
  std::stringstream ss;
  write_bls(t, ss);
  const auto back = parse_bls(ss);
  EXPECT_EQ(back.size(), 146u);
  EXPECT_EQ(back, t);
}

TEST(CorpusDb, KeepsBlsTable) {
  fixture::TempDir dir("corpusdb");
  const auto e2e = fixture::write_end_to_end(dir.path());
  const auto corpus = load_manifest(e2e.manifest);
  const auto bls = load_bls(e2e.bls);
  save_corpus_db(dir / "corpus.db", corpus, bls);
  const auto db = load_corpus(dir / "corpus.db");
  EXPECT_EQ(db.corpus.records(), corpus.records());
  ASSERT_TRUE(db.bls.has_value());
  EXPECT_EQ(*db.bls, bls);
  const auto plain = load_corpus(e2e.manifest);
  EXPECT_FALSE(plain.bls.has_value());
}
