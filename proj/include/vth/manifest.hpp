#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vth/image.hpp"

namespace vth {

enum class Polarity { higher_is_worse, higher_is_better };

struct ManifestRecord {
  std::filesystem::path reference_path;  // resolved against the manifest directory
  std::filesystem::path distorted_path;
  double raw_score = 0.0;
  double score_min = 0.0;
  double score_max = 1.0;
  Polarity polarity = Polarity::higher_is_worse;
};

// An aligned image pair with its global score mapped to [0, 1], where 0 is
// an imperceptible distortion and 1 the worst.
struct QualityRecord {
  GrayImage reference;
  GrayImage distorted;
  double q_global = 0.0;
};

inline constexpr const char* kManifestHeader = "reference,distorted,raw_score,score_min,score_max,polarity";

// Parses a manifest CSV. Lines starting with '#' and blank lines are ignored.
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);

void save_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path,
                   const std::string& comment = {});

double normalize_score(const ManifestRecord& rec);

// Loads both images of every record and normalizes its score.
std::vector<QualityRecord> load_quality_records(const std::vector<ManifestRecord>& records);

Polarity parse_polarity(const std::string& token);
const char* to_string(Polarity p);

}  // namespace vth
