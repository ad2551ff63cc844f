#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tti/audit.hpp"
#include "tti/knn_graph.hpp"
#include "tti/pipeline.hpp"
#include "tti/reports.hpp"
#include "tti/service.hpp"

using namespace tti;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result cli(const fixture::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + TTI_CLI + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, RunMatchesLibraryBundle) {
  fixture::TempDir dir("cli-run");
  const auto e2e = fixture::write_end_to_end(dir.path());
  const auto r = cli(dir, "run --config " + q(e2e.config) + " --out " + q(dir / "cli") + " --canonical");
  ASSERT_EQ(r.code, 0) << r.err;
  run_audit(load_config(e2e.config), dir / "lib");
  EXPECT_EQ(fixture::snapshot(dir / "cli"), fixture::snapshot(dir / "lib"));
}

TEST(Cli, FeaturePipelineAndKnnMatchService) {
  fixture::TempDir dir("cli-knn");
  const auto e2e = fixture::write_end_to_end(dir.path(), true);
  ASSERT_EQ(cli(dir, "ingest --manifest " + q(e2e.manifest) + " --bls " + q(e2e.bls) + " --out " + q(dir / "corpus.db")).code, 0);
  ASSERT_EQ(cli(dir, "features --corpus " + q(dir / "corpus.db") + " --out " + q(dir / "feats")).code, 0);
  ASSERT_EQ(cli(dir, "codebook --feats " + q(dir / "feats") + " --k 32 --max-iter 30").code, 0);
  ASSERT_EQ(cli(dir, "vectorize --codebook " + q(dir / "feats" / "codebook.cbk") + " --feats " + q(dir / "feats") +
                         " --out " + q(dir / "vecs")).code,
            0);
  ASSERT_EQ(cli(dir, "index --vecs " + q(dir / "vecs") + " --k 10").code, 0);
  ASSERT_EQ(cli(dir, "run --config " + q(e2e.config) + " --out " + q(dir / "bundle")).code, 0);

  const auto state = std::make_shared<const ServiceState>(
      load_service_state({dir / "bundle", dir / "corpus.db", dir / "vecs", {}}));
  const Service svc(state);
  for (const std::string by : {"bovw", "colorfulness"}) {
    const auto& probe = state->vectors.ids[11];
    const auto r = cli(dir, "knn --vecs " + q(dir / "vecs") + " --probe " + probe + " --k 5 --by " + by);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto http = svc.handle("/knn", {{"id", probe}, {"k", "5"}, {"by", by}});
    EXPECT_EQ(json::parse(r.out), json::parse(http.body)) << by;
  }
}

TEST(Cli, StandaloneStagesAgreeWithBundle) {
  fixture::TempDir dir("cli-stages");
  const auto e2e = fixture::write_end_to_end(dir.path());
  ASSERT_EQ(cli(dir, "run --config " + q(e2e.config) + " --out " + q(dir / "bundle")).code, 0);
  ASSERT_EQ(cli(dir, "assign --model " + q(dir / "bundle" / "model.clm") + " --emb " + q(e2e.embeddings) +
                         " --out " + q(dir / "assign.json")).code,
            0);
  std::ifstream a(dir / "assign.json"), b(dir / "bundle" / "assignments.json");
  EXPECT_EQ(json::parse(a).at("assignments"), json::parse(b).at("assignments"));

  const auto r = cli(dir, "diversity --assignments " + q(dir / "assign.json") + " --corpus " + q(e2e.manifest) +
                              " --kind identities --n 8 --ci 0.99 --b 200 --seed 17");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream d(dir / "bundle" / "diversity.json");
  const auto bundle = json::parse(d);
  EXPECT_EQ(json::parse(r.out).at("datasets").at("identities"), bundle.at("datasets").at("identities"));
}

TEST(Cli, ErrorsExitNonZero) {
  fixture::TempDir dir("cli-err");
  auto r = cli(dir, "run --config " + q(dir / "missing.conf") + " --out " + q(dir / "b"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  r = cli(dir, "knn --probe x --by hue");
  EXPECT_NE(r.code, 0);
  r = cli(dir, "frobnicate");
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(cli(dir, "--help").code, 0);
}
