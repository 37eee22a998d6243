#include "cinesr/dicom.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include "cinesr/error.hpp"

namespace cinesr {

namespace {

constexpr const char* kExplicitLE = "1.2.840.10008.1.2.1";

struct Reader {
  std::ifstream in;
  std::filesystem::path path;

  [[noreturn]] void fail(const std::string& why) const {
    raise(ErrorCode::CorruptFrame, why + ": " + path.string());
  }

  void read_bytes(void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) fail("unexpected end of file");
  }

  std::uint16_t u16() {
    std::array<std::uint8_t, 2> b;
    read_bytes(b.data(), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32() {
    std::array<std::uint8_t, 4> b;
    read_bytes(b.data(), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  void skip(std::uint32_t n) { in.seekg(n, std::ios::cur); }

  bool eof_next() { return in.peek() == EOF; }
};

bool is_long_vr(const char vr[2]) {
  auto eq = [&](const char* s) { return vr[0] == s[0] && vr[1] == s[1]; };
  return eq("OB") || eq("OW") || eq("OF") || eq("SQ") || eq("UT") || eq("UN");
}

// Skips a sequence with undefined length, handling nested undefined-length
// items and sequences.
void skip_undefined_sequence(Reader& r);

void skip_undefined_item(Reader& r) {
  for (;;) {
    const std::uint16_t group = r.u16();
    const std::uint16_t elem = r.u16();
    if (group == 0xfffe && elem == 0xe00d) {
      r.u32();  // item delimitation length (zero)
      return;
    }
    char vr[2];
    r.read_bytes(vr, 2);
    std::uint32_t len;
    if (is_long_vr(vr)) {
      r.u16();
      len = r.u32();
    } else {
      len = r.u16();
    }
    if (len == 0xffffffff) {
      if (vr[0] == 'S' && vr[1] == 'Q') {
        skip_undefined_sequence(r);
      } else {
        r.fail("undefined length on non-sequence element");
      }
    } else {
      r.skip(len);
    }
  }
}

void skip_undefined_sequence(Reader& r) {
  for (;;) {
    const std::uint16_t group = r.u16();
    const std::uint16_t elem = r.u16();
    const std::uint32_t len = r.u32();
    if (group == 0xfffe && elem == 0xe0dd) return;  // sequence delimitation
    if (group != 0xfffe || elem != 0xe000) r.fail("malformed sequence");
    if (len == 0xffffffff) {
      skip_undefined_item(r);
    } else {
      r.skip(len);
    }
  }
}

std::string read_string(Reader& r, std::uint32_t len) {
  std::string s(len, '\0');
  r.read_bytes(s.data(), len);
  while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

DicomFrame read_dicom(const std::filesystem::path& path, bool header_only) {
  Reader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) raise(ErrorCode::CorruptFrame, "cannot open: " + path.string());

  char magic[4];
  r.skip(128);
  r.read_bytes(magic, 4);
  if (std::memcmp(magic, "DICM", 4) != 0) r.fail("missing DICM magic");

  DicomFrame frame;
  int pixel_representation = 0;
  std::string transfer_syntax = kExplicitLE;

  while (!r.eof_next()) {
    const std::uint16_t group = r.u16();
    const std::uint16_t elem = r.u16();
    char vr[2];
    r.read_bytes(vr, 2);
    std::uint32_t len;
    if (is_long_vr(vr)) {
      r.u16();
      len = r.u32();
    } else {
      len = r.u16();
    }

    const std::uint32_t tag = (static_cast<std::uint32_t>(group) << 16) | elem;
    if (len == 0xffffffff) {
      if (vr[0] == 'S' && vr[1] == 'Q') {
        skip_undefined_sequence(r);
        continue;
      }
      if (tag == 0x7fe00010) r.fail("encapsulated pixel data unsupported");
      r.fail("undefined element length");
    }

    switch (tag) {
      case 0x00020010:  // TransferSyntaxUID
        transfer_syntax = read_string(r, len);
        // The dataset below the meta group is parsed as explicit VR, so any
        // other syntax cannot be decoded.
        if (transfer_syntax != kExplicitLE) r.fail("unsupported transfer syntax " + transfer_syntax);
        break;
      case 0x00280010:  // Rows
        frame.rows = r.u16();
        break;
      case 0x00280011:  // Columns
        frame.cols = r.u16();
        break;
      case 0x00280100:  // BitsAllocated
        frame.bits_allocated = r.u16();
        break;
      case 0x00280103:  // PixelRepresentation
        pixel_representation = r.u16();
        break;
      case 0x00200013: {  // InstanceNumber, VR IS
        const std::string s = read_string(r, len);
        try {
          frame.instance_number = std::stoi(s);
        } catch (const std::exception&) {
        }
        break;
      }
      case 0x00181060: {  // TriggerTime, VR DS
        const std::string s = read_string(r, len);
        try {
          frame.trigger_time = std::stod(s);
        } catch (const std::exception&) {
        }
        break;
      }
      case 0x7fe00010: {  // PixelData
        if (transfer_syntax != kExplicitLE) r.fail("unsupported transfer syntax " + transfer_syntax);
        if (frame.rows <= 0 || frame.cols <= 0) r.fail("pixel data before Rows/Columns");
        if (frame.bits_allocated != 8 && frame.bits_allocated != 16) {
          r.fail("unsupported BitsAllocated " + std::to_string(frame.bits_allocated));
        }
        if (pixel_representation != 0) r.fail("signed pixel data unsupported");
        if (header_only) {
          frame.pixels.clear();
          return frame;
        }
        const std::size_t n = static_cast<std::size_t>(frame.rows) * frame.cols;
        const std::size_t expect = n * (frame.bits_allocated / 8);
        if (len < expect) r.fail("pixel data shorter than Rows*Columns");
        frame.pixels.resize(n);
        if (frame.bits_allocated == 8) {
          std::vector<std::uint8_t> buf(n);
          r.read_bytes(buf.data(), n);
          for (std::size_t i = 0; i < n; ++i) frame.pixels[i] = buf[i];
        } else {
          std::vector<std::uint8_t> buf(2 * n);
          r.read_bytes(buf.data(), 2 * n);
          for (std::size_t i = 0; i < n; ++i) {
            frame.pixels[i] = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
          }
        }
        return frame;
      }
      default:
        r.skip(len);
        break;
    }
  }
  if (header_only && frame.rows > 0 && frame.cols > 0) return frame;
  r.fail("no pixel data element");
}

}  // namespace cinesr
