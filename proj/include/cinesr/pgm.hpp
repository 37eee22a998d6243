#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cinesr/image.hpp"

namespace cinesr {

struct RawFrame {
  int h = 0;
  int w = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;  // row-major
};

// Binary PGM ("P5"). 16-bit samples are big-endian per the Netpbm spec.
RawFrame read_pgm(const std::filesystem::path& path);

void write_pgm16(const std::filesystem::path& path, const RawFrame& frame);

// Quantizes [0,1] floats to the given maxval and writes a binary PGM.
void write_pgm(const std::filesystem::path& path, const Image& img, int maxval = 255);

}  // namespace cinesr
