#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cinesr/data_ingest.hpp"
#include "cinesr/dicom.hpp"
#include "cinesr/error.hpp"
#include "cinesr/pgm.hpp"

using namespace cinesr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image ramp_image(int h, int w, float lo = 0.f, float hi = 1.f) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x) = lo + (hi - lo) * static_cast<float>(y * w + x) / static_cast<float>(h * w - 1);
    }
  }
  return img;
}

void write_pgm_tree(const fs::path& root, int patients, int slices, int frames, int h = 24, int w = 24) {
  for (int p = 0; p < patients; ++p) {
    for (int s = 0; s < slices; ++s) {
      const fs::path dir = root / ("patient_" + std::to_string(p)) / ("slice_" + std::to_string(s));
      fs::create_directories(dir);
      for (int k = 0; k < frames; ++k) {
        Image img = ramp_image(h, w, 0.f, 0.5f + 0.1f * static_cast<float>(k % 3));
        write_pgm(dir / ("frame_" + std::to_string(k) + ".pgm"), img, 65535);
      }
    }
  }
}

// Minimal explicit-VR little-endian DICOM writer for fixtures.
struct DicomWriter {
  std::vector<unsigned char> bytes;

  DicomWriter() {
    bytes.assign(128, 0);
    const char* magic = "DICM";
    bytes.insert(bytes.end(), magic, magic + 4);
    // (0002,0010) TransferSyntaxUID = explicit VR little endian
    std::string ts = "1.2.840.10008.1.2.1";
    if (ts.size() % 2) ts.push_back('\0');
    element_short(0x0002, 0x0010, "UI", std::vector<unsigned char>(ts.begin(), ts.end()));
  }

  void u16le(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
  }

  void element_short(std::uint16_t group, std::uint16_t elem, const char* vr,
                     const std::vector<unsigned char>& payload) {
    u16le(bytes, group);
    u16le(bytes, elem);
    bytes.push_back(static_cast<unsigned char>(vr[0]));
    bytes.push_back(static_cast<unsigned char>(vr[1]));
    u16le(bytes, static_cast<std::uint16_t>(payload.size()));
    bytes.insert(bytes.end(), payload.begin(), payload.end());
  }

  void element_us(std::uint16_t group, std::uint16_t elem, std::uint16_t value) {
    std::vector<unsigned char> payload;
    u16le(payload, value);
    element_short(group, elem, "US", payload);
  }

  void element_is(std::uint16_t group, std::uint16_t elem, const std::string& s) {
    std::string v = s;
    if (v.size() % 2) v.push_back(' ');
    element_short(group, elem, "IS", std::vector<unsigned char>(v.begin(), v.end()));
  }

  void pixel_data(const std::vector<std::uint16_t>& pixels) {
    u16le(bytes, 0x7fe0);
    u16le(bytes, 0x0010);
    bytes.push_back('O');
    bytes.push_back('W');
    bytes.push_back(0);
    bytes.push_back(0);
    const std::uint32_t len = static_cast<std::uint32_t>(pixels.size() * 2);
    bytes.push_back(static_cast<unsigned char>(len & 0xff));
    bytes.push_back(static_cast<unsigned char>((len >> 8) & 0xff));
    bytes.push_back(static_cast<unsigned char>((len >> 16) & 0xff));
    bytes.push_back(static_cast<unsigned char>((len >> 24) & 0xff));
    for (std::uint16_t p : pixels) u16le(bytes, p);
  }

  void save(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
};

void write_dicom_frame(const fs::path& path, int rows, int cols, int instance,
                       std::uint16_t fill_base) {
  DicomWriter w;
  w.element_is(0x0020, 0x0013, std::to_string(instance));
  w.element_us(0x0028, 0x0010, static_cast<std::uint16_t>(rows));
  w.element_us(0x0028, 0x0011, static_cast<std::uint16_t>(cols));
  w.element_us(0x0028, 0x0100, 16);
  w.element_us(0x0028, 0x0103, 0);
  std::vector<std::uint16_t> pixels(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<std::uint16_t>(fill_base + i % 577);
  }
  w.pixel_data(pixels);
  w.save(path);
}

}  // namespace

TEST_CASE("normalize_frame applies exact min-max scaling") {
  std::vector<int> raw = {0, 1000, 4095, 2047};
  const Image out = data::normalize_frame(raw, 2, 2, 4095);
  CHECK(out.at(0, 0) == 0.f);
  CHECK(out.at(0, 1) == doctest::Approx(1000.f / 4095.f).epsilon(1e-6));
  CHECK(out.at(1, 0) == 1.0f);  // max maps exactly to 1
  CHECK(out.at(1, 1) == doctest::Approx(2047.f / 4095.f).epsilon(1e-6));
}

TEST_CASE("normalize_frame maps constant input to zeros") {
  std::vector<int> raw(16, 700);
  const Image out = data::normalize_frame(raw, 4, 4, 4095);
  for (float v : out.v) CHECK(v == 0.f);
}

TEST_CASE("normalize_frame validates arguments") {
  std::vector<int> raw(4, 1);
  CHECK_THROWS_AS(data::normalize_frame(raw, 2, 2, 0), Error);
  CHECK_THROWS_AS(data::normalize_frame(raw, 3, 2, 255), Error);
}

TEST_CASE("phantom clips are deterministic and periodic") {
  data::PhantomConfig pc;
  pc.size = 48;
  pc.period = 30;
  pc.base_radius = 14;
  pc.contraction_amplitude = 0.3;
  pc.noise_level = 0.0;

  const auto a = data::synth_phantom_clip(pc, 31, 5);
  const auto b = data::synth_phantom_clip(pc, 31, 5);
  REQUIRE(a.frame_count() == 31);
  for (int t = 0; t < 31; ++t) CHECK(a.frames[t].v == b.frames[t].v);

  // period 30: frame 0 equals frame 30 bit-exactly when noiseless
  CHECK(a.frames[0].v == a.frames[30].v);

  for (const auto& f : a.frames) {
    CHECK(all_finite(f));
    CHECK(min_value(f) >= 0.f);
    CHECK(max_value(f) <= 1.f);
  }
}

TEST_CASE("static phantom renders identical frames") {
  data::PhantomConfig pc;
  pc.size = 32;
  pc.period = 10;
  pc.base_radius = 9;
  pc.contraction_amplitude = 0.0;
  pc.noise_level = 0.0;
  const auto clip = data::synth_phantom_clip(pc, 8, 3);
  for (int t = 1; t < 8; ++t) CHECK(clip.frames[0].v == clip.frames[t].v);
}

TEST_CASE("phantom seeds drive the noise stream") {
  data::PhantomConfig pc;
  pc.size = 32;
  pc.period = 10;
  pc.base_radius = 9;
  pc.contraction_amplitude = 0.2;
  pc.noise_level = 0.02;
  const auto a = data::synth_phantom_clip(pc, 4, 1);
  const auto b = data::synth_phantom_clip(pc, 4, 2);
  CHECK(a.frames[0].v != b.frames[0].v);
}

TEST_CASE("phantom config is validated") {
  data::PhantomConfig pc;
  pc.period = 1;
  CHECK_THROWS_AS(data::synth_phantom_clip(pc, 8, 1), Error);
  pc.period = 10;
  pc.contraction_amplitude = 1.0;
  CHECK_THROWS_AS(data::synth_phantom_clip(pc, 8, 1), Error);
  pc.contraction_amplitude = 0.2;
  pc.noise_level = -0.5;
  CHECK_THROWS_AS(data::synth_phantom_clip(pc, 8, 1), Error);
}

TEST_CASE("pgm 16-bit round trip") {
  const fs::path dir = temp_dir("cinesr_pgm");
  const Image img = ramp_image(9, 7);
  write_pgm(dir / "x.pgm", img, 65535);
  const RawFrame raw = read_pgm(dir / "x.pgm");
  CHECK(raw.h == 9);
  CHECK(raw.w == 7);
  CHECK(raw.maxval == 65535);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    CHECK(std::fabs(raw.samples[i] / 65535.f - img.v[i]) < 1e-4);
  }
  fs::remove_all(dir);
}

TEST_CASE("scan_dataset indexes a pgm tree and is idempotent") {
  const fs::path root = temp_dir("cinesr_tree");
  write_pgm_tree(root, 2, 3, 30);

  const auto index1 = data::scan_dataset(root, data::DatasetFormat::pgm_tree);
  CHECK(index1.entries.size() == 6);
  CHECK(index1.patient_count() == 2);
  for (const auto& rec : index1.entries) {
    CHECK(rec.frame_count == 30);
    CHECK(rec.source_paths.size() == 30);
  }

  const auto index2 = data::scan_dataset(root, data::DatasetFormat::pgm_tree);
  REQUIRE(index2.entries.size() == index1.entries.size());
  for (std::size_t i = 0; i < index1.entries.size(); ++i) {
    CHECK(index1.entries[i].patient_id == index2.entries[i].patient_id);
    CHECK(index1.entries[i].slice_id == index2.entries[i].slice_id);
    CHECK(index1.entries[i].source_paths == index2.entries[i].source_paths);
  }
  fs::remove_all(root);
}

TEST_CASE("scan_dataset handles empty and missing roots") {
  const fs::path root = temp_dir("cinesr_empty");
  std::ostringstream log;
  const auto index = data::scan_dataset(root, data::DatasetFormat::pgm_tree, &log);
  CHECK(index.entries.empty());
  CHECK(log.str().find("warning") != std::string::npos);
  CHECK_THROWS_AS(data::scan_dataset(root / "nope", data::DatasetFormat::pgm_tree), Error);
  fs::remove_all(root);
}

TEST_CASE("scan_dataset skips series with unparseable headers and logs them") {
  const fs::path root = temp_dir("cinesr_badhdr");
  write_pgm_tree(root, 1, 2, 3);
  {
    std::ofstream bad(root / "patient_0" / "slice_1" / "frame_1.pgm", std::ios::binary);
    bad << "NOTApgm";
  }
  std::ostringstream log;
  const auto index = data::scan_dataset(root, data::DatasetFormat::pgm_tree, &log);
  CHECK(index.entries.size() == 1);
  CHECK(index.entries[0].slice_id == "0");
  CHECK(log.str().find("slice_1") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("load_cine_clip resizes to 256 and preserves time order") {
  const fs::path root = temp_dir("cinesr_load");
  // 20 frames of 16x24 (non-square, non-256) with increasing intensity
  const fs::path dir = root / "patient_7" / "slice_2";
  fs::create_directories(dir);
  for (int k = 0; k < 20; ++k) {
    Image img(16, 24, 0.02f + 0.04f * static_cast<float>(k));
    img.at(8, 12) = 1.f;  // ensure a common max so per-clip scaling is stable
    write_pgm(dir / ("frame_" + std::to_string(k) + ".pgm"), img, 65535);
  }
  const auto index = data::scan_dataset(root, data::DatasetFormat::pgm_tree);
  const auto clip = data::load_cine_clip(index, "7", "2");
  REQUIRE(clip.frame_count() == 20);
  for (const auto& f : clip.frames) {
    CHECK(f.h == 256);
    CHECK(f.w == 256);
    CHECK(all_finite(f));
    CHECK(min_value(f) >= 0.f);
    CHECK(max_value(f) <= 1.f);
  }
  // strictly increasing background intensity across time
  for (int k = 1; k < 20; ++k) {
    CHECK(clip.frames[k].at(2, 2) > clip.frames[k - 1].at(2, 2));
  }
  CHECK_THROWS_AS(data::load_cine_clip(index, "7", "9"), Error);
  fs::remove_all(root);
}

TEST_CASE("load_cine_clip reports the missing time index") {
  const fs::path root = temp_dir("cinesr_gap");
  const fs::path dir = root / "patient_1" / "slice_0";
  fs::create_directories(dir);
  for (int k : {1, 2, 4}) {
    write_pgm(dir / ("frame_" + std::to_string(k) + ".pgm"), ramp_image(12, 12), 65535);
  }
  const auto index = data::scan_dataset(root, data::DatasetFormat::pgm_tree);
  try {
    data::load_cine_clip(index, "1", "0");
    FAIL("expected MissingFrame");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingFrame);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  fs::remove_all(root);
}

TEST_CASE("load_cine_clip raises CorruptFrame on truncated payloads") {
  const fs::path root = temp_dir("cinesr_trunc");
  const fs::path dir = root / "patient_1" / "slice_0";
  fs::create_directories(dir);
  write_pgm(dir / "frame_0.pgm", ramp_image(12, 12), 65535);
  {
    // Valid header, truncated body.
    std::ofstream f(dir / "frame_1.pgm", std::ios::binary);
    f << "P5\n12 12\n65535\n";
    f << "xx";
  }
  const auto index = data::scan_dataset(root, data::DatasetFormat::pgm_tree);
  if (!index.entries.empty()) {
    CHECK_THROWS_AS(data::load_cine_clip(index, "1", "0"), Error);
  }
  fs::remove_all(root);
}

TEST_CASE("dicom series are scanned, ordered by instance number, and loaded") {
  const fs::path root = temp_dir("cinesr_dicom");
  const fs::path dir = root / "pat01" / "study" / "sax_5";
  fs::create_directories(dir);
  // Write out of order on disk; instance numbers define time.
  write_dicom_frame(dir / "IM-0001-0003.dcm", 20, 28, 3, 300);
  write_dicom_frame(dir / "IM-0001-0001.dcm", 20, 28, 1, 100);
  write_dicom_frame(dir / "IM-0001-0002.dcm", 20, 28, 2, 200);

  const auto index = data::scan_dataset(root, data::DatasetFormat::dicom);
  REQUIRE(index.entries.size() == 1);
  CHECK(index.entries[0].patient_id == "pat01");
  CHECK(index.entries[0].slice_id == "study/sax_5");
  CHECK(index.entries[0].frame_count == 3);
  CHECK(index.entries[0].time_indices == std::vector<int>{1, 2, 3});

  const auto clip = data::load_cine_clip(index, "pat01", "study/sax_5");
  REQUIRE(clip.frame_count() == 3);
  for (const auto& f : clip.frames) {
    CHECK(f.h == 256);
    CHECK(f.w == 256);
  }
  fs::remove_all(root);
}

TEST_CASE("dicom reader exposes header fields and validates magic") {
  const fs::path root = temp_dir("cinesr_dicom2");
  write_dicom_frame(root / "a.dcm", 10, 12, 7, 40);
  const DicomFrame frame = read_dicom(root / "a.dcm");
  CHECK(frame.rows == 10);
  CHECK(frame.cols == 12);
  CHECK(frame.bits_allocated == 16);
  CHECK(frame.instance_number == 7);
  CHECK(frame.pixels.size() == 120);

  const DicomFrame hdr = read_dicom(root / "a.dcm", /*header_only=*/true);
  CHECK(hdr.pixels.empty());
  CHECK(hdr.rows == 10);

  std::ofstream bad(root / "bad.dcm", std::ios::binary);
  bad << "this is not dicom at all, definitely not 132 bytes of preamble";
  bad.close();
  CHECK_THROWS_AS(read_dicom(root / "bad.dcm"), Error);
  fs::remove_all(root);
}

TEST_CASE("dicom scan skips unparseable series and logs them") {
  const fs::path root = temp_dir("cinesr_dicom3");
  const fs::path ok_dir = root / "p1" / "sax_1";
  const fs::path bad_dir = root / "p2" / "sax_1";
  fs::create_directories(ok_dir);
  fs::create_directories(bad_dir);
  write_dicom_frame(ok_dir / "f1.dcm", 8, 8, 1, 10);
  {
    std::ofstream bad(bad_dir / "f1.dcm", std::ios::binary);
    bad << "garbage";
  }
  std::ostringstream log;
  const auto index = data::scan_dataset(root, data::DatasetFormat::dicom, &log);
  CHECK(index.entries.size() == 1);
  CHECK(index.entries[0].patient_id == "p1");
  CHECK(log.str().find("p2") != std::string::npos);
  fs::remove_all(root);
}
