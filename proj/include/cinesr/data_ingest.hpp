#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cinesr/image.hpp"

namespace cinesr::data {

enum class DatasetFormat { dicom, pgm_tree };

struct SeriesRecord {
  std::string patient_id;
  std::string slice_id;
  int frame_count = 0;
  std::vector<std::filesystem::path> source_paths;  // ordered by time index
  std::vector<int> time_indices;                    // parallel to source_paths
};

struct PatientIndex {
  std::vector<SeriesRecord> entries;

  const SeriesRecord* find(const std::string& patient_id, const std::string& slice_id) const;
  std::size_t patient_count() const;
};

struct CineClip {
  std::string patient_id;
  std::string slice_id;
  std::vector<Image> frames;  // intensities in [0,1], time order

  int frame_count() const { return static_cast<int>(frames.size()); }
};

struct PhantomConfig {
  int size = 256;                      // square frame side, pixels
  int period = 30;                     // frames per cardiac cycle
  double base_radius = 72.0;           // pixels
  double contraction_amplitude = 0.3;  // fraction of base_radius, in [0,1)
  double noise_level = 0.0;            // additive Gaussian std, intensity units
  std::uint64_t texture_seed = 7;

  void validate() const;  // raises InvalidConfig
};

// Walks the dataset tree and groups files into (patient, slice) series
// ordered by time index. Series whose headers cannot be parsed are skipped
// and reported on scan_log (one line each). An empty tree gives an empty
// index with a warning line, not an error.
PatientIndex scan_dataset(const std::filesystem::path& root, DatasetFormat format,
                          std::ostream* scan_log = nullptr);

// Decodes one series, per-clip min-max normalizes and resizes every frame to
// 256x256 with bicubic resampling.
CineClip load_cine_clip(const PatientIndex& index, const std::string& patient_id,
                        const std::string& slice_id);

// (raw - min) / (max - min); a constant frame maps to all zeros. Values must
// lie in [0, bit_depth_max].
Image normalize_frame(const std::vector<int>& raw, int h, int w, int bit_depth_max);

// Deterministic beating-phantom clip: a textured ellipse whose radius
// oscillates sinusoidally over `period` frames, on a fixed background
// texture, with optional per-frame noise.
CineClip synth_phantom_clip(const PhantomConfig& config, int frame_count, std::uint64_t seed);

}  // namespace cinesr::data
