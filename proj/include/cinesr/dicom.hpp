#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace cinesr {

struct DicomFrame {
  int rows = 0;
  int cols = 0;
  int bits_allocated = 0;
  std::optional<int> instance_number;   // (0020,0013)
  std::optional<double> trigger_time;   // (0018,1060), milliseconds
  std::vector<std::uint16_t> pixels;    // row-major, empty when header_only
};

// Minimal DICOM reader: explicit-VR little-endian, uncompressed monochrome
// pixel data. Anything else raises CorruptFrame. With header_only the pixel
// data element is not decoded.
DicomFrame read_dicom(const std::filesystem::path& path, bool header_only = false);

}  // namespace cinesr
