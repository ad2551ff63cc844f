#pragma once

// End-to-end audit: cluster -> assign -> summarize -> diversity -> quintiles
// -> markers, written as a bundle directory:
//
//   provenance.json  config, config hash, seeds, input fingerprints, stages
//   model.clm        identity cluster model
//   assignments.json image id -> cluster for every embedded image
//   regions.json/.md diversity.json/.md quintiles.json/.md markers.json/.md

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tti {

struct AuditConfig {
  std::filesystem::path corpus;       ///< manifest or ingested corpus database
  std::filesystem::path bls;          ///< optional when the corpus database carries BLS rows
  std::filesystem::path embeddings;   ///< EMB1 with identity and evaluated images
  std::filesystem::path annotations;  ///< optional JSONL captions / VQA answers
  std::uint32_t n_clusters = 24;
  double diversity_level = 0.99;
  double quintile_level = 0.95;
  int bootstrap_b = 1000;
  std::uint64_t seed = 17;
  std::string gender_phrase = "woman";
  std::size_t gender_rank = 2;
  std::string ethnicity_phrase = "Black";
  std::size_t ethnicity_rank = 4;
  bool quintiles = true;
  bool markers = true;
  /// Omit timestamps so reruns produce identical bytes.
  bool canonical = false;
  unsigned workers = 1;

  /// Canonical key=value text, one entry per line in a fixed order.
  std::string to_text() const;
  std::string hash() const;
  nlohmann::json seeds() const;
};

/// Reads `key = value` lines; '#' starts a comment. Relative paths resolve
/// against `base_dir`. Unknown keys and bad values raise ParseError.
AuditConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
AuditConfig load_config(const std::filesystem::path& path);

/// Checks referenced files and stage prerequisites without computing
/// anything. Throws ValidationError prefixed with "config: ".
void validate_config(const AuditConfig& config);

struct AuditBundle {
  std::filesystem::path dir;
  nlohmann::json provenance;
  nlohmann::json regions;
  nlohmann::json diversity;
  std::optional<nlohmann::json> quintiles;
  std::optional<nlohmann::json> markers;
};

/// Runs every stage and writes the bundle. A failing stage is recorded in
/// provenance.json and rethrown as Error("stage <name>: ...").
AuditBundle run_audit(const AuditConfig& config, const std::filesystem::path& out_dir);

/// Files of a bundle directory, in a fixed order.
std::vector<std::string> bundle_files(const std::filesystem::path& dir);

}  // namespace tti
