#include "fsenet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace fsenet {

namespace {

void write_u64(std::ofstream& f, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  if (!f) throw FormatError("truncated archive header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

// Serialise floats explicitly little-endian so archives are portable.
void write_f32_le(std::ofstream& f, const float* data, int64_t n) {
  std::vector<unsigned char> buf(static_cast<size_t>(n) * 4);
  for (int64_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    buf[static_cast<size_t>(i) * 4 + 0] = static_cast<unsigned char>(bits & 0xff);
    buf[static_cast<size_t>(i) * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    buf[static_cast<size_t>(i) * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    buf[static_cast<size_t>(i) * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f32_le(std::ifstream& f, float* data, int64_t n) {
  std::vector<unsigned char> buf(static_cast<size_t>(n) * 4);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw FormatError("truncated archive payload");
  for (int64_t i = 0; i < n; ++i) {
    uint32_t bits = static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 0]) |
                    (static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 1]) << 8) |
                    (static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 2]) << 16) |
                    (static_cast<uint32_t>(buf[static_cast<size_t>(i) * 4 + 3]) << 24);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace

void save_archive(const std::string& path, const Archive& a) {
  nlohmann::json manifest;
  manifest["format"] = "fsenet-archive-v1";
  manifest["config"] = nlohmann::json::parse(config_to_json(a.config));
  manifest["extras"] = a.extras;
  nlohmann::json table = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : a.tensors) {
    nlohmann::json row;
    row["name"] = name;
    row["shape"] = t.shape();
    row["dtype"] = "f32";
    row["offset"] = offset;
    table.push_back(row);
    offset += static_cast<uint64_t>(t.numel()) * 4;
  }
  manifest["tensors"] = table;
  std::string mtext = manifest.dump();

  // Atomic write: temp file then rename.
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp);
    write_u64(f, mtext.size());
    f.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& [name, t] : a.tensors) write_f32_le(f, t.data(), t.numel());
    if (!f) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename " + tmp + " -> " + path);
}

Archive load_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  uint64_t mlen = read_u64(f);
  if (mlen > (1ull << 30)) throw FormatError("implausible manifest length in " + path);
  std::string mtext(mlen, '\0');
  f.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw FormatError("truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad manifest in " + path + ": " + e.what());
  }
  if (manifest.value("format", "") != "fsenet-archive-v1")
    throw FormatError("not an fsenet archive: " + path);

  Archive a;
  a.config = config_from_json(manifest["config"].dump());
  if (manifest.contains("extras"))
    a.extras = manifest["extras"].get<std::map<std::string, std::string>>();
  for (const auto& row : manifest["tensors"]) {
    if (row.value("dtype", "") != "f32") throw FormatError("unsupported dtype in " + path);
    std::vector<int> shape = row["shape"].get<std::vector<int>>();
    Tensor<float> t(shape);
    read_f32_le(f, t.data(), t.numel());
    a.tensors.emplace_back(row["name"].get<std::string>(), std::move(t));
  }
  return a;
}

void save_checkpoint(const std::string& path, const FSENetConfig& cfg,
                     const nn::ParamStore<float>& store,
                     const std::map<std::string, std::string>& extras) {
  Archive a;
  a.config = cfg;
  a.extras = extras;
  for (const auto& e : store.entries()) a.tensors.emplace_back(e.name, e.value);
  save_archive(path, a);
}

void load_into_store(const Archive& a, nn::ParamStore<float>& store) {
  for (const auto& [name, t] : a.tensors) {
    if (name.rfind("adam.", 0) == 0 || name.rfind("state.", 0) == 0) continue;
    int id = store.find(name);
    if (id < 0) throw FormatError("checkpoint tensor not in model: " + name);
    auto& e = store.entry(id);
    if (e.value.shape() != t.shape())
      throw FormatError("shape mismatch for tensor " + name + ": checkpoint " + t.shape_str() +
                        " vs model " + e.value.shape_str());
    e.value = t;
  }
  for (auto& e : store.entries())
    if (!a.find(e.name)) throw FormatError("checkpoint missing tensor: " + e.name);
}

}  // namespace fsenet
