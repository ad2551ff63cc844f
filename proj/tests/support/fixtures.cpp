#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

namespace tti::fixture {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("tti-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

RgbImage blob_image(int width, int height, const std::vector<std::pair<double, double>>& centers, double spot_sigma) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 20;
      for (const auto& [cx, cy] : centers) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        v += 220 * std::exp(-d2 / (2 * spot_sigma * spot_sigma));
      }
      const auto c = static_cast<std::uint8_t>(std::min(255.0, std::round(v)));
      auto* p = &px[(static_cast<std::size_t>(y) * width + x) * 3];
      p[0] = p[1] = p[2] = c;
    }
  }
  return RgbImage(width, height, std::move(px));
}

RgbImage noise_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng() & 0xff);
  return RgbImage(width, height, std::move(px));
}

RgbImage texture_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const double base[3] = {u(rng) * 200, u(rng) * 200, u(rng) * 200};
  struct Spot {
    double x, y, s, c[3];
  };
  std::vector<Spot> spots;
  const int n = 4 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) {
    spots.push_back({u(rng) * width, u(rng) * height, 2 + u(rng) * 5, {u(rng) * 255, u(rng) * 255, u(rng) * 255}});
  }
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double v = base[ch] * (0.5 + 0.5 * x / width);
        for (const auto& s : spots) {
          const double d2 = (x - s.x) * (x - s.x) + (y - s.y) * (y - s.y);
          v += s.c[ch] * std::exp(-d2 / (2 * s.s * s.s));
        }
        px[(static_cast<std::size_t>(y) * width + x) * 3 + ch] =
            static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return RgbImage(width, height, std::move(px));
}

Eigen::MatrixXd random_unit_rows(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = g(rng);
    m.row(i).normalize();
  }
  return m;
}

VectorSet topic_vectors(const TopicParams& p) {
  std::mt19937_64 rng(p.seed);
  std::vector<std::vector<int>> topics(p.topics);
  for (auto& t : topics) {
    std::set<int> words;
    while (static_cast<int>(words.size()) < p.words_per_topic) words.insert(static_cast<int>(rng() % p.dim));
    t.assign(words.begin(), words.end());
  }
  std::uniform_real_distribution<double> u(0, 1);
  VectorSet out;
  out.dim = p.dim;
  for (int i = 0; i < p.n; ++i) {
    const auto& t = topics[rng() % p.topics];
    std::map<int, double> counts;
    for (int w = 0; w < p.words_per_vector; ++w) {
      const int word = u(rng) < p.topic_mix ? t[rng() % t.size()] : static_cast<int>(rng() % p.dim);
      counts[word] += 1;
    }
    SparseVec v(p.dim);
    double n2 = 0;
    for (const auto& [w, c] : counts) n2 += c * c;
    for (const auto& [w, c] : counts) v.insertBack(w) = c / std::sqrt(n2);
    char id[16];
    std::snprintf(id, sizeof id, "v%05d", i);
    out.ids.push_back(id);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

DescriptorSet descriptor_set(const std::string& id, const std::vector<std::vector<float>>& rows) {
  DescriptorSet s;
  s.image_id = id;
  s.descriptors.resize(static_cast<Eigen::Index>(rows.size()), kDescriptorDim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < kDescriptorDim; ++j) s.descriptors(static_cast<Eigen::Index>(i), j) = rows[i][j];
    s.keypoints.push_back({0, 0, 1, 0});
  }
  return s;
}

std::vector<RegionSummary> table2_regions() {
  struct Row {
    std::uint32_t cluster;
    double share;
    std::vector<std::string> gender;
    std::vector<std::string> ethnicity;
  };
  const Row rows[] = {
      {4, 40.1, {"unspecified", "man"}, {"Caucasian", "White", "unspecified", "Latinx"}},
      {15, 12.6, {"woman", "non-binary"}, {"White", "Caucasian", "unspecified", "First Nations"}},
      {21, 9.2, {"man", "unspecified"}, {"unspecified", "White"}},
      {18, 8.8, {"man", "unspecified"}, {"unspecified", "White", "Caucasian"}},
      {13, 7.5, {"woman", "unspecified"}, {"Latinx", "Hispanic", "Latino", "unspecified"}},
      {22, 3.1, {"unspecified", "man"}, {"Southeast Asian", "Black", "Indigenous American", "Multiracial"}},
      {1, 2.7, {"woman", "non-binary"}, {"Black", "African-American", "Multiracial", "unspecified"}},
      {10, 2.7, {"non-binary", "woman"}, {"Latinx", "White", "Indigenous American", "unspecified"}},
      {3, 1.9, {"man", "unspecified"}, {"Black", "African-American", "Multiracial", "Pacific Islander"}},
      {17, 1.3, {"non-binary"}, {"White", "unspecified", "Caucasian", "Hispanic"}},
  };
  std::vector<RegionSummary> out;
  for (const auto& r : rows) {
    RegionSummary s;
    s.cluster = r.cluster;
    s.members = 85;
    s.share = r.share / 100.0;
    double pct = 60;
    for (const auto& g : r.gender) s.top_gender.push_back({g, pct}), pct -= 25;
    pct = 40;
    for (const auto& e : r.ethnicity) s.top_ethnicity.push_back({e, pct}), pct -= 8;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

// Embedding of a portrait with the given gender and ethnicity slot (-1 = none).
Eigen::RowVectorXf portrait_embedding(Gender g, int ethnicity, std::mt19937_64& rng) {
  std::normal_distribution<float> noise(0.0f, 0.08f);
  Eigen::RowVectorXf v(16);
  for (int i = 0; i < 16; ++i) v(i) = noise(rng);
  v(static_cast<int>(g)) += 1.0f;
  const int e = ethnicity + 1;  // 0 = unspecified
  v(4 + e % 12) += 0.8f;
  v(4 + (e * 5 + 3) % 12) += 0.4f;
  return v;
}

}  // namespace

CaptionTally twenty_caption_tally() {
  CaptionTally t;
  t.texts = {
      "a woman sitting at a desk",         // woman
      "a man in a suit",                   // man
      "a person holding a phone",          // person
      "two people in an office",           // person
      "a girl with a book",                // woman
      "an old gentleman",                  // man
      "a policeman on duty",               // unmarked
      "a chef cooking",                    // unmarked
      "a young lady smiling",              // woman
      "a guy with a beard",                // man
      "the women are laughing",            // woman
      "men playing football",              // man
      "a male nurse and a person",         // man
      "portrait of a doctor",              // unmarked
      "a businesswoman at work",           // unmarked
      "a person and a woman",              // woman
      "ladies at a table",                 // woman
      "a photo of someone",                // unmarked
      "Person standing outside",           // person
      "a female firefighter",              // woman
  };
  t.expected.texts = 20;
  t.expected.woman = 7;
  t.expected.man = 5;
  t.expected.marked = 12;
  t.expected.person = 3;
  return t;
}

EndToEnd write_end_to_end(const fs::path& dir, bool images) {
  fs::create_directories(dir);
  EndToEnd out;
  out.systems = {"sysA", "sysB"};
  const auto all_professions = default_professions();
  std::vector<std::string> bls_professions;
  for (int i = 0; i < 10; ++i) bls_professions.emplace_back(all_professions[static_cast<std::size_t>(i) * 13]);
  out.professions.assign(bls_professions.begin(), bls_professions.begin() + 8);

  std::vector<BlsRow> bls_rows;
  for (int i = 0; i < 10; ++i) bls_rows.push_back({bls_professions[i], 5.0 + 9.0 * i, 3.0 + 2.0 * i});
  const BlsTable bls(bls_rows);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ImageRecord> records;
  std::vector<std::string> ids;
  RowMatrixXf rows(200, 16);
  std::vector<Annotation> anns;
  const auto eths = identity_ethnicities();

  auto add = [&](const std::string& system, PromptSpec prompt, std::uint32_t seed, Gender g, int eth,
                 const std::string& caption, const std::string& appearance) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%03zu", system.c_str(), records.size());
    ImageRecord r;
    r.id = id;
    r.file = fs::path("img") / (r.id + ".png");
    r.system = system;
    r.prompt = std::move(prompt);
    r.seed_index = seed;
    rows.row(static_cast<Eigen::Index>(records.size())) = portrait_embedding(g, eth, rng);
    Annotation a;
    a.image_id = r.id;
    a.caption = caption;
    a.vqa[QuestionKey::Appearance] = appearance;
    a.vqa[QuestionKey::Gender] = std::string(gender_phrase(g) == "unspecified" ? "person" : gender_phrase(g));
    a.vqa[QuestionKey::Ethnicity] = eth < 0 ? "White" : std::string(eths[static_cast<std::size_t>(eth)]);
    anns.push_back(std::move(a));
    ids.push_back(r.id);
    records.push_back(std::move(r));
  };

  for (const auto& system : out.systems) {
    for (const auto& p : enumerate_identity_prompts()) {
      int eth = -1;
      for (std::size_t e = 0; e < eths.size(); ++e) {
        if (p.ethnicity && *p.ethnicity == eths[e]) eth = static_cast<int>(e);
      }
      const std::string who = p.gender == Gender::Woman ? "woman" : p.gender == Gender::Man ? "man" : "person";
      add(system, p, 0, p.gender, eth, "a photo of a " + who + " at work", who);
    }
    for (std::size_t pi = 0; pi < out.professions.size(); ++pi) {
      const auto& prof = out.professions[pi];
      const auto* row = bls.find(prof);
      for (std::uint32_t s = 0; s < 4; ++s) {
        const Gender g = u(rng) * 100 < row->pct_women ? Gender::Woman : Gender::Man;
        const int black = 2;  // "Black" in the identity list
        const int eth = u(rng) * 100 < row->pct_black * 3 ? black : (u(rng) < 0.5 ? -1 : 15);
        const std::string who = g == Gender::Woman ? "woman" : "man";
        const std::string caption =
            s % 2 == 0 ? "a " + who + " working as a " + prof : "a portrait of a " + who + " in an office";
        add(system, PromptSpec::for_profession(prof), s, g, eth, caption, s == 3 ? "professional" : who);
      }
    }
  }

  const Corpus corpus(records, dir);
  out.manifest = dir / "manifest.jsonl";
  save_manifest(corpus, out.manifest);
  out.bls = dir / "bls.csv";
  {
    std::ofstream f(out.bls);
    write_bls(bls, f);
  }
  out.embeddings = dir / "embeddings.emb";
  save_embeddings(EmbeddingMatrix(ids, rows), out.embeddings);
  out.annotations = dir / "annotations.jsonl";
  save_annotations(anns, out.annotations);
  out.config = dir / "audit.conf";
  {
    std::ofstream f(out.config);
    f << "# synthetic end-to-end fixture\n"
      << "corpus = manifest.jsonl\n"
      << "bls = bls.csv\n"
      << "embeddings = embeddings.emb\n"
      << "annotations = annotations.jsonl\n"
      << "n_clusters = 8\n"
      << "bootstrap_b = 200\n"
      << "seed = 17\n"
      << "gender_rank = 2\n"
      << "ethnicity_rank = 4\n"
      << "canonical = true\n";
  }
  if (images) {
    fs::create_directories(dir / "img");
    std::uint64_t s = 1;
    for (const auto& r : corpus.records()) save_png(texture_image(64, 64, s++), corpus.resolve(r));
  }
  return out;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    out[fs::relative(e.path(), dir).generic_string()] = ss.str();
  }
  return out;
}

}  // namespace tti::fixture
