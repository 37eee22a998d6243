#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinesr/nn/tensor.hpp"

namespace cinesr::nn {

// Binary checkpoint container: magic, format version, JSON config header,
// then named float32 arrays.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  nlohmann::json header;
  std::vector<std::pair<std::string, Tensorf>> arrays;

  void add(const std::string& name, const Tensorf& t) { arrays.emplace_back(name, t); }

  const Tensorf* find(const std::string& name) const {
    for (const auto& [n, t] : arrays) {
      if (n == name) return &t;
    }
    return nullptr;
  }

  // Raises CheckpointMismatch when a name is absent or the shape differs.
  const Tensorf& require(const std::string& name, const std::vector<int>& shape) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  // FNV-1a over all array payloads, order-sensitive. Used for the
  // frozen-weights check.
  std::uint64_t weights_hash() const;
};

}  // namespace cinesr::nn
