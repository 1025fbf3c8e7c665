#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vth/error.hpp"
#include "vth/manifest.hpp"

namespace vth {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& token, const std::string& where) {
  double value = 0.0;
  const char* end = token.data() + token.size();
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, end, value);
  if (token.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
    throw DataError(where + ": cannot parse number '" + token + "'");
  return value;
}

}  // namespace

Polarity parse_polarity(const std::string& token) {
  if (token == "higher_is_worse") return Polarity::higher_is_worse;
  if (token == "higher_is_better") return Polarity::higher_is_better;
  throw DataError("unknown polarity '" + token + "' (expected higher_is_worse or higher_is_better)");
}

const char* to_string(Polarity p) {
  return p == Polarity::higher_is_worse ? "higher_is_worse" : "higher_is_better";
}

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const auto base = path.parent_path();

  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!have_header) {
      if (content != kManifestHeader)
        throw DataError(where + ": expected header '" + std::string(kManifestHeader) + "'");
      have_header = true;
      continue;
    }
    const auto fields = split_csv(content);
    if (fields.size() != 6)
      throw DataError(where + ": expected 6 columns, found " + std::to_string(fields.size()) + " (missing column?)");
    ManifestRecord rec;
    if (fields[0].empty() || fields[1].empty()) throw DataError(where + ": empty image path");
    rec.reference_path = base / fields[0];
    rec.distorted_path = base / fields[1];
    rec.raw_score = parse_number(fields[2], where);
    rec.score_min = parse_number(fields[3], where);
    rec.score_max = parse_number(fields[4], where);
    try {
      rec.polarity = parse_polarity(fields[5]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!(rec.score_min < rec.score_max)) throw DataError(where + ": score_min must be below score_max");
    if (rec.raw_score < rec.score_min || rec.raw_score > rec.score_max)
      throw DataError(where + ": raw_score outside [score_min, score_max]");
    records.push_back(std::move(rec));
  }
  if (!have_header) throw DataError(path.string() + ": missing header line");
  return records;
}

void save_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path,
                   const std::string& comment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  if (!comment.empty()) out << "# " << comment << "\n";
  out << kManifestHeader << "\n";
  char buf[64];
  auto number = [&buf](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  for (const auto& r : records) {
    out << r.reference_path.lexically_relative(base).generic_string() << ','
        << r.distorted_path.lexically_relative(base).generic_string() << ',' << number(r.raw_score) << ','
        << number(r.score_min) << ',' << number(r.score_max) << ',' << to_string(r.polarity) << "\n";
  }
  if (!out) throw DataError("write failed for " + path.string());
}

double normalize_score(const ManifestRecord& rec) {
  const double t = (rec.raw_score - rec.score_min) / (rec.score_max - rec.score_min);
  return rec.polarity == Polarity::higher_is_worse ? t : 1.0 - t;
}

std::vector<QualityRecord> load_quality_records(const std::vector<ManifestRecord>& records) {
  std::vector<QualityRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    GrayImage ref = load_pgm(rec.reference_path);
    GrayImage dist = load_pgm(rec.distorted_path);
    if (ref.width() != dist.width() || ref.height() != dist.height())
      throw DataError("dimension mismatch between " + rec.reference_path.string() + " and " +
                      rec.distorted_path.string());
    out.push_back({std::move(ref), std::move(dist), normalize_score(rec)});
  }
  return out;
}

}  // namespace vth
