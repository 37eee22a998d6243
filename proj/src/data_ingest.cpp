#include "cinesr/data_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "cinesr/degrade.hpp"
#include "cinesr/dicom.hpp"
#include "cinesr/error.hpp"
#include "cinesr/pgm.hpp"
#include "cinesr/rng.hpp"

namespace fs = std::filesystem;

namespace cinesr::data {

namespace {

constexpr int kTargetSize = 256;

// Trailing decimal run in a filename stem, e.g. "IM-2370-0012" -> 12.
std::optional<int> trailing_int(const std::string& stem) {
  int end = static_cast<int>(stem.size());
  int begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin == end) return std::nullopt;
  try {
    return std::stoi(stem.substr(begin, end - begin));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool has_extension(const fs::path& p, const char* ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

void log_line(std::ostream* scan_log, const std::string& line) {
  if (scan_log) *scan_log << line << "\n";
}

void sort_series(SeriesRecord& rec) {
  std::vector<std::size_t> order(rec.source_paths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rec.time_indices[a] < rec.time_indices[b]; });
  std::vector<fs::path> paths;
  std::vector<int> indices;
  paths.reserve(order.size());
  indices.reserve(order.size());
  for (std::size_t i : order) {
    paths.push_back(rec.source_paths[i]);
    indices.push_back(rec.time_indices[i]);
  }
  rec.source_paths = std::move(paths);
  rec.time_indices = std::move(indices);
  rec.frame_count = static_cast<int>(rec.source_paths.size());
}

void scan_pgm_tree(const fs::path& root, PatientIndex& index, std::ostream* scan_log) {
  for (const auto& patient_dir : fs::directory_iterator(root)) {
    if (!patient_dir.is_directory()) continue;
    const std::string pname = patient_dir.path().filename().string();
    if (pname.rfind("patient_", 0) != 0) continue;
    const std::string patient_id = pname.substr(8);
    for (const auto& slice_dir : fs::directory_iterator(patient_dir.path())) {
      if (!slice_dir.is_directory()) continue;
      const std::string sname = slice_dir.path().filename().string();
      if (sname.rfind("slice_", 0) != 0) continue;
      SeriesRecord rec;
      rec.patient_id = patient_id;
      rec.slice_id = sname.substr(6);
      bool ok = true;
      for (const auto& f : fs::directory_iterator(slice_dir.path())) {
        if (!f.is_regular_file() || !has_extension(f.path(), ".pgm")) continue;
        const std::string stem = f.path().stem().string();
        if (stem.rfind("frame_", 0) != 0) continue;
        const auto k = trailing_int(stem);
        if (!k) {
          log_line(scan_log, "skip series " + slice_dir.path().string() + ": unparseable frame name " +
                                 f.path().filename().string());
          ok = false;
          break;
        }
        try {
          // Cheap header validation; the pixel payload is decoded at load time.
          read_pgm(f.path());
        } catch (const Error&) {
          log_line(scan_log,
                   "skip series " + slice_dir.path().string() + ": unparseable header in " + f.path().string());
          ok = false;
          break;
        }
        rec.source_paths.push_back(f.path());
        rec.time_indices.push_back(*k);
      }
      if (ok && !rec.source_paths.empty()) {
        sort_series(rec);
        index.entries.push_back(std::move(rec));
      }
    }
  }
}

void scan_dicom_tree(const fs::path& root, PatientIndex& index, std::ostream* scan_log) {
  // (patient, slice) -> files; slice is the directory path relative to the
  // patient directory.
  std::map<std::pair<std::string, std::string>, std::vector<fs::path>> groups;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || !has_extension(entry.path(), ".dcm")) continue;
    const fs::path rel = fs::relative(entry.path(), root);
    auto it = rel.begin();
    if (it == rel.end()) continue;
    const std::string patient_id = it->string();
    fs::path slice_rel;
    for (++it; it != rel.end(); ++it) {
      if (std::next(it) == rel.end()) break;  // last component is the file name
      slice_rel /= *it;
    }
    const std::string slice_id = slice_rel.empty() ? "series" : slice_rel.generic_string();
    groups[{patient_id, slice_id}].push_back(entry.path());
  }

  for (auto& [key, files] : groups) {
    std::sort(files.begin(), files.end());
    SeriesRecord rec;
    rec.patient_id = key.first;
    rec.slice_id = key.second;
    std::vector<std::optional<int>> instance;
    std::vector<std::optional<double>> trigger;
    bool ok = true;
    for (const auto& f : files) {
      try {
        const DicomFrame hdr = read_dicom(f, /*header_only=*/true);
        instance.push_back(hdr.instance_number);
        trigger.push_back(hdr.trigger_time);
      } catch (const Error& e) {
        log_line(scan_log, "skip series " + key.first + "/" + key.second + ": " + e.what());
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    const auto all = [&](auto& opts) {
      return std::all_of(opts.begin(), opts.end(), [](const auto& o) { return o.has_value(); });
    };
    rec.source_paths = files;
    rec.time_indices.resize(files.size());
    if (all(instance)) {
      for (std::size_t i = 0; i < files.size(); ++i) rec.time_indices[i] = *instance[i];
    } else if (all(trigger)) {
      // Rank trigger times; ranks are contiguous time indices by construction.
      std::vector<std::size_t> order(files.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return *trigger[a] < *trigger[b]; });
      for (std::size_t r = 0; r < order.size(); ++r) rec.time_indices[order[r]] = static_cast<int>(r);
    } else {
      bool have_names = true;
      std::vector<int> name_idx(files.size());
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto k = trailing_int(files[i].stem().string());
        if (!k) {
          have_names = false;
          break;
        }
        name_idx[i] = *k;
      }
      if (have_names) {
        rec.time_indices = name_idx;
      } else {
        std::iota(rec.time_indices.begin(), rec.time_indices.end(), 0);
      }
    }
    sort_series(rec);
    index.entries.push_back(std::move(rec));
  }
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Smooth band-limited texture: a fixed set of oriented sinusoids.
struct SineTexture {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;

  SineTexture(std::uint64_t seed, int n_waves, double min_cycles, double max_cycles, int size) {
    Rng rng(seed);
    waves.reserve(static_cast<std::size_t>(n_waves));
    for (int i = 0; i < n_waves; ++i) {
      const double cycles = rng.uniform(min_cycles, max_cycles);
      const double theta = rng.uniform(0.0, 6.283185307179586);
      const double f = 6.283185307179586 * cycles / static_cast<double>(size);
      waves.push_back({f * std::cos(theta), f * std::sin(theta), rng.uniform(0.0, 6.283185307179586),
                       1.0 / static_cast<double>(n_waves)});
    }
  }

  // In roughly [-1, 1].
  double operator()(double x, double y) const {
    double s = 0.0;
    for (const auto& w : waves) s += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
    return s;
  }
};

}  // namespace

const SeriesRecord* PatientIndex::find(const std::string& patient_id, const std::string& slice_id) const {
  for (const auto& rec : entries) {
    if (rec.patient_id == patient_id && rec.slice_id == slice_id) return &rec;
  }
  return nullptr;
}

std::size_t PatientIndex::patient_count() const {
  std::set<std::string> ids;
  for (const auto& rec : entries) ids.insert(rec.patient_id);
  return ids.size();
}

void PhantomConfig::validate() const {
  if (size < 8) raise(ErrorCode::InvalidConfig, "phantom size must be >= 8");
  if (period < 2) raise(ErrorCode::InvalidConfig, "phantom period must be >= 2");
  if (contraction_amplitude < 0.0 || contraction_amplitude >= 1.0) {
    raise(ErrorCode::InvalidConfig, "contraction_amplitude must be in [0,1)");
  }
  if (noise_level < 0.0) raise(ErrorCode::InvalidConfig, "noise_level must be >= 0");
  if (base_radius <= 0.0) raise(ErrorCode::InvalidConfig, "base_radius must be > 0");
}

PatientIndex scan_dataset(const fs::path& root, DatasetFormat format, std::ostream* scan_log) {
  if (!fs::exists(root) || !fs::is_directory(root)) {
    raise(ErrorCode::RootNotFound, root.string());
  }
  PatientIndex index;
  if (format == DatasetFormat::pgm_tree) {
    scan_pgm_tree(root, index, scan_log);
  } else {
    scan_dicom_tree(root, index, scan_log);
  }
  std::sort(index.entries.begin(), index.entries.end(), [](const SeriesRecord& a, const SeriesRecord& b) {
    return std::tie(a.patient_id, a.slice_id) < std::tie(b.patient_id, b.slice_id);
  });
  if (index.entries.empty()) {
    log_line(scan_log, "warning: no series found under " + root.string());
  }
  return index;
}

Image normalize_frame(const std::vector<int>& raw, int h, int w, int bit_depth_max) {
  if (bit_depth_max <= 0) raise(ErrorCode::InvalidConfig, "bit_depth_max must be > 0");
  if (static_cast<std::size_t>(h) * w != raw.size()) {
    raise(ErrorCode::ShapeMismatch, "raw size does not match h*w");
  }
  const auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
  const int mn = *mn_it, mx = *mx_it;
  Image out(h, w, 0.f);
  if (mx > mn) {
    const float inv = 1.f / static_cast<float>(mx - mn);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out.v[i] = static_cast<float>(raw[i] - mn) * inv;
    }
  }
  return out;
}

CineClip load_cine_clip(const PatientIndex& index, const std::string& patient_id,
                        const std::string& slice_id) {
  const SeriesRecord* rec = index.find(patient_id, slice_id);
  if (!rec) raise(ErrorCode::SeriesNotFound, patient_id + "/" + slice_id);

  for (std::size_t i = 1; i < rec->time_indices.size(); ++i) {
    if (rec->time_indices[i] != rec->time_indices[i - 1] + 1) {
      raise(ErrorCode::MissingFrame,
            "series " + patient_id + "/" + slice_id + " missing time index " +
                std::to_string(rec->time_indices[i - 1] + 1));
    }
  }

  // Decode all frames to integers first; normalization is per clip.
  std::vector<RawFrame> raws;
  raws.reserve(rec->source_paths.size());
  for (const auto& path : rec->source_paths) {
    if (has_extension(path, ".pgm")) {
      raws.push_back(read_pgm(path));
    } else {
      const DicomFrame d = read_dicom(path);
      RawFrame r;
      r.h = d.rows;
      r.w = d.cols;
      r.maxval = (d.bits_allocated == 8) ? 255 : 65535;
      r.samples = d.pixels;
      raws.push_back(std::move(r));
    }
  }

  int mn = raws.empty() ? 0 : raws[0].samples[0];
  int mx = mn;
  for (const auto& r : raws) {
    for (std::uint16_t s : r.samples) {
      mn = std::min(mn, static_cast<int>(s));
      mx = std::max(mx, static_cast<int>(s));
    }
  }

  CineClip clip;
  clip.patient_id = patient_id;
  clip.slice_id = slice_id;
  clip.frames.reserve(raws.size());
  const float inv = (mx > mn) ? 1.f / static_cast<float>(mx - mn) : 0.f;
  for (const auto& r : raws) {
    Image img(r.h, r.w);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      img.v[i] = static_cast<float>(static_cast<int>(r.samples[i]) - mn) * inv;
    }
    if (img.h != kTargetSize || img.w != kTargetSize) {
      img = degrade::bicubic_resize_to(img, kTargetSize, kTargetSize);
    }
    clamp01(img);
    clip.frames.push_back(std::move(img));
  }
  return clip;
}

CineClip synth_phantom_clip(const PhantomConfig& config, int frame_count, std::uint64_t seed) {
  config.validate();
  if (frame_count < 2) raise(ErrorCode::InvalidConfig, "frame_count must be >= 2");

  const int s = config.size;
  const double cx = 0.5 * (s - 1);
  const double cy = 0.5 * (s - 1);
  const double ax0 = config.base_radius;        // horizontal semi-axis
  const double ay0 = 0.8 * config.base_radius;  // vertical semi-axis
  const SineTexture bg_tex(Rng::mix(config.texture_seed, 1), 8, 1.5, 5.0, s);
  const SineTexture in_tex(Rng::mix(config.texture_seed, 2), 10, 3.0, 9.0, s);

  CineClip clip;
  clip.patient_id = "phantom";
  clip.slice_id = "0";
  clip.frames.reserve(static_cast<std::size_t>(frame_count));

  for (int t = 0; t < frame_count; ++t) {
    // Integer phase keeps frame t and frame t+period bit-identical.
    const int phase = t % config.period;
    const double angle = 6.283185307179586 * static_cast<double>(phase) / config.period;
    const double scale = 1.0 - config.contraction_amplitude * (0.5 - 0.5 * std::cos(angle));
    const double ax = ax0 * scale;
    const double ay = ay0 * scale;

    Image img(s, s);
    const double edge = 1.5 / ax;  // ~1.5 px feather at the boundary
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const double bg = 0.22 + 0.10 * bg_tex(x, y);
        // Material coordinates: the interior texture contracts with the
        // ellipse so that intensity features move with the tissue.
        const double mx_ = cx + (x - cx) / scale;
        const double my_ = cy + (y - cy) / scale;
        const double rho =
            std::sqrt(((x - cx) * (x - cx)) / (ax * ax) + ((y - cy) * (y - cy)) / (ay * ay));
        double value = bg;
        if (rho < 1.0 + edge) {
          const double pool = 0.84 - 0.26 * smoothstep(0.45, 0.62, rho);  // bright pool, darker ring
          const double inside = pool + 0.14 * in_tex(mx_, my_);
          value = inside + (bg - inside) * smoothstep(1.0 - edge, 1.0 + edge, rho);
        }
        img.at(y, x) = static_cast<float>(value);
      }
    }
    if (config.noise_level > 0.0) {
      Rng noise_rng(Rng::mix(seed, static_cast<std::uint64_t>(t) + 17));
      for (auto& p : img.v) {
        p += static_cast<float>(config.noise_level * noise_rng.normal());
      }
    }
    clamp01(img);
    clip.frames.push_back(std::move(img));
  }
  return clip;
}

}  // namespace cinesr::data
