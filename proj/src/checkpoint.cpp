#include "cinesr/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cinesr/error.hpp"

namespace cinesr::nn {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) raise(ErrorCode::CheckpointMismatch, "truncated checkpoint: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

const Tensorf& Checkpoint::require(const std::string& name, const std::vector<int>& shape) const {
  const Tensorf* t = find(name);
  if (!t) raise(ErrorCode::CheckpointMismatch, "missing array " + name);
  if (t->shape != shape) raise(ErrorCode::CheckpointMismatch, "shape mismatch for array " + name);
  return *t;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) raise(ErrorCode::DataUnavailable, "cannot write " + path.string());
    out.write(kMagic, 8);
    put_u32(out, kFormatVersion);
    const std::string hdr = header.dump();
    put_u32(out, static_cast<std::uint32_t>(hdr.size()));
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    put_u32(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& [name, t] : arrays) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      out.put(0);  // dtype: float32
      out.put(static_cast<char>(t.ndim()));
      for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
      out.write(reinterpret_cast<const char*>(t.ptr()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) raise(ErrorCode::DataUnavailable, "write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::CheckpointMismatch, "cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    raise(ErrorCode::CheckpointMismatch, "bad magic: " + path.string());
  }
  const std::uint32_t version = get_u32(in, path.string());
  if (version != kFormatVersion) {
    raise(ErrorCode::CheckpointMismatch,
          "unsupported format version " + std::to_string(version) + ": " + path.string());
  }
  Checkpoint ckpt;
  const std::uint32_t hdr_len = get_u32(in, path.string());
  std::string hdr(hdr_len, '\0');
  in.read(hdr.data(), hdr_len);
  if (!in) raise(ErrorCode::CheckpointMismatch, "truncated header: " + path.string());
  try {
    ckpt.header = nlohmann::json::parse(hdr);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::CheckpointMismatch, std::string("bad header json: ") + e.what());
  }
  const std::uint32_t n_arrays = get_u32(in, path.string());
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    const std::uint32_t name_len = get_u32(in, path.string());
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int dtype = in.get();
    const int ndim = in.get();
    if (!in || dtype != 0 || ndim < 0 || ndim > 8) {
      raise(ErrorCode::CheckpointMismatch, "bad array record: " + path.string());
    }
    std::vector<int> shape(static_cast<std::size_t>(ndim));
    for (auto& d : shape) d = static_cast<int>(get_u32(in, path.string()));
    Tensorf t(shape);
    in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) raise(ErrorCode::CheckpointMismatch, "truncated array " + name + ": " + path.string());
    ckpt.arrays.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

std::uint64_t Checkpoint::weights_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : arrays) {
    mix(name.data(), name.size());
    mix(t.ptr(), t.data.size() * sizeof(float));
  }
  return h;
}

}  // namespace cinesr::nn
