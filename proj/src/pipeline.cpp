#include "tti/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tti/colorfulness.hpp"
#include "tti/error.hpp"
#include "tti/image.hpp"
#include "tti/parallel.hpp"

namespace tti {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Minimal CSV line split; fields containing commas are quoted.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind(header, 0) != 0) {
    throw ParseError(path.string() + ": expected header \"" + std::string(header) + "\"", 1);
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv(line);
    if (f.size() != 2) throw ParseError(path.string() + ": expected 2 fields", no);
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace

FeatureSummary extract_features(const Corpus& corpus, const std::filesystem::path& out_dir, const SiftParams& params,
                                unsigned workers) {
  std::filesystem::create_directories(out_dir);
  const auto& recs = corpus.records();
  std::vector<std::size_t> counts(recs.size());
  std::vector<double> color(recs.size());
  std::vector<std::string> files(recs.size());
  parallel_for(recs.size(), workers, [&](std::size_t i) {
    const RgbImage img = load_image(corpus.resolve(recs[i]));
    color[i] = colorfulness(img);
    DescriptorSet set;
    try {
      set = sift_descriptors(img, params);
    } catch (const ValidationError& e) {
      throw ValidationError("image \"" + recs[i].id + "\": " + e.what());
    }
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.sft", i);
    files[i] = name;
    save_descriptors(set, out_dir / name);
    counts[i] = set.size();
  });
  std::ofstream idx(out_dir / "index.csv", std::ios::trunc);
  if (!idx) throw IoError("cannot write " + (out_dir / "index.csv").string());
  idx << "image_id,file\n";
  std::map<std::string, double> scores;
  FeatureSummary s;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    idx << quote_csv(recs[i].id) << ',' << files[i] << '\n';
    scores[recs[i].id] = color[i];
    s.descriptors += counts[i];
  }
  s.images = recs.size();
  save_colorfulness(scores, out_dir / kColorfulnessFile);
  return s;
}

std::vector<DescriptorSet> load_feature_dir(const std::filesystem::path& dir) {
  std::vector<DescriptorSet> out;
  for (auto& row : read_csv(dir / "index.csv", "image_id,file")) {
    out.push_back(load_descriptors(dir / row[1], row[0]));
  }
  return out;
}

void save_colorfulness(const std::map<std::string, double>& scores, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "image_id,colorfulness\n";
  for (const auto& [id, v] : scores) out << quote_csv(id) << ',' << format_double(v) << '\n';
}

std::map<std::string, double> load_colorfulness(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  std::size_t no = 1;
  for (auto& row : read_csv(path, "image_id,colorfulness")) {
    ++no;
    double v = 0;
    const auto& s = row[1];
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !(v >= 0)) {
      throw ParseError(path.string() + ": bad colorfulness value \"" + s + "\"", no);
    }
    if (!out.emplace(row[0], v).second) throw ParseError(path.string() + ": duplicate id \"" + row[0] + "\"", no);
  }
  return out;
}

Codebook build_codebook(std::span<const DescriptorSet> sets, int k, std::uint64_t seed, int max_iter,
                        unsigned workers) {
  Codebook cb = train_codebook(sets, k, seed, max_iter, workers);
  std::vector<std::vector<std::uint32_t>> counts(sets.size());
  parallel_for(sets.size(), workers, [&](std::size_t i) { counts[i] = word_counts(sets[i].descriptors, cb.centroids); });
  cb.idf = compute_idf(counts, cb.k());
  return cb;
}

VectorSet vectorize_all(std::span<const DescriptorSet> sets, const Codebook& codebook, unsigned workers) {
  VectorSet vs;
  vs.dim = codebook.k();
  vs.ids.resize(sets.size());
  vs.vectors.resize(sets.size());
  parallel_for(sets.size(), workers, [&](std::size_t i) {
    vs.ids[i] = sets[i].image_id;
    vs.vectors[i] = vectorize(sets[i].descriptors, codebook, codebook.idf);
  });
  return vs;
}

}  // namespace tti
