#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "vth/checkpoint.hpp"
#include "vth/error.hpp"

namespace vth {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'H', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(in[pos + i])} << (8 * i);
  return v;
}

std::string serialize_params(const PNetParams& params) {
  std::string out;
  out.reserve(params.size() * 8);
  for (double v : params.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

constexpr std::uint32_t kArch[5] = {arch::kPatch, arch::kInChannels, arch::kFilters, arch::kKernel, arch::kHidden};
constexpr std::size_t kHeaderBytes = 4 + 5 * 4 + 8;

}  // namespace

void save_checkpoint(const PNetParams& params, const nlohmann::json& meta, const std::filesystem::path& path) {
  std::string out(kMagic, kMagic + 4);
  for (std::uint32_t v : kArch) put_u32(out, v);
  put_u64(out, params.size());
  out += serialize_params(params);
  const std::string json = meta.dump();
  put_u64(out, json.size());
  out += json;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";

  if (in.size() < 4 || in.compare(0, 3, "VTH") != 0) throw DataError(where + "not a checkpoint (bad magic)");
  if (in[3] != kMagic[3])
    throw DataError(where + "unsupported checkpoint version 'VTH" + std::string(1, in[3]) + "' (expected VTH1)");
  if (in.size() < kHeaderBytes) throw DataError(where + "size mismatch: truncated header");

  for (int i = 0; i < 5; ++i) {
    if (get_le(in, 4 + 4 * i, 4) != kArch[i]) throw DataError(where + "architecture mismatch in header");
  }
  const std::uint64_t count = get_le(in, 24, 8);
  if (count != arch::kParamCount)
    throw DataError(where + "size mismatch: declares " + std::to_string(count) + " parameters, architecture has " +
                    std::to_string(arch::kParamCount));
  const std::size_t params_end = kHeaderBytes + count * 8;
  if (in.size() < params_end + 8) throw DataError(where + "size mismatch: truncated parameter block");

  Checkpoint ck;
  for (std::size_t i = 0; i < count; ++i)
    ck.params[i] = std::bit_cast<double>(get_le(in, kHeaderBytes + 8 * i, 8));
  const std::uint64_t meta_len = get_le(in, params_end, 8);
  if (in.size() - (params_end + 8) != meta_len) throw DataError(where + "size mismatch: metadata length");
  try {
    ck.meta = nlohmann::json::parse(in.substr(params_end + 8));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + "corrupt metadata: " + e.what());
  }
  return ck;
}

std::string params_fingerprint(const PNetParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_params(params)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vth
