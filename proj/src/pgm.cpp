#include "cinesr/pgm.hpp"

#include <cmath>
#include <fstream>

#include "cinesr/error.hpp"

namespace cinesr {

namespace {

// Reads the next whitespace-delimited token, skipping '#' comment lines.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return false;
  do {
    tok.push_back(static_cast<char>(c));
  } while ((c = in.get()) != EOF && !std::isspace(c));
  return true;
}

}  // namespace

RawFrame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::CorruptFrame, "cannot open " + path.string());

  std::string tok;
  if (!next_token(in, tok) || tok != "P5") {
    raise(ErrorCode::CorruptFrame, "not a binary PGM: " + path.string());
  }
  RawFrame frame;
  try {
    if (!next_token(in, tok)) throw std::invalid_argument("eof");
    frame.w = std::stoi(tok);
    if (!next_token(in, tok)) throw std::invalid_argument("eof");
    frame.h = std::stoi(tok);
    if (!next_token(in, tok)) throw std::invalid_argument("eof");
    frame.maxval = std::stoi(tok);
  } catch (const std::exception&) {
    raise(ErrorCode::CorruptFrame, "bad PGM header: " + path.string());
  }
  if (frame.w <= 0 || frame.h <= 0 || frame.maxval <= 0 || frame.maxval > 65535) {
    raise(ErrorCode::CorruptFrame, "bad PGM dimensions: " + path.string());
  }

  const std::size_t n = static_cast<std::size_t>(frame.w) * frame.h;
  frame.samples.resize(n);
  if (frame.maxval < 256) {
    std::vector<std::uint8_t> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      raise(ErrorCode::CorruptFrame, "truncated PGM: " + path.string());
    }
    for (std::size_t i = 0; i < n; ++i) frame.samples[i] = buf[i];
  } else {
    std::vector<std::uint8_t> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
    if (static_cast<std::size_t>(in.gcount()) != static_cast<std::streamsize>(2 * n)) {
      raise(ErrorCode::CorruptFrame, "truncated PGM: " + path.string());
    }
    for (std::size_t i = 0; i < n; ++i) {
      frame.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
  }
  return frame;
}

void write_pgm16(const std::filesystem::path& path, const RawFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::DataUnavailable, "cannot write " + path.string());
  out << "P5\n" << frame.w << " " << frame.h << "\n" << frame.maxval << "\n";
  std::vector<std::uint8_t> buf;
  buf.reserve(frame.samples.size() * 2);
  for (std::uint16_t s : frame.samples) {
    buf.push_back(static_cast<std::uint8_t>(s >> 8));
    buf.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_pgm(const std::filesystem::path& path, const Image& img, int maxval) {
  RawFrame frame;
  frame.h = img.h;
  frame.w = img.w;
  frame.maxval = maxval;
  frame.samples.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float x = std::clamp(img.v[i], 0.f, 1.f);
    frame.samples[i] = static_cast<std::uint16_t>(std::lround(x * static_cast<float>(maxval)));
  }
  if (maxval < 256) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::DataUnavailable, "cannot write " + path.string());
    out << "P5\n" << frame.w << " " << frame.h << "\n" << frame.maxval << "\n";
    std::vector<std::uint8_t> buf(frame.samples.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<std::uint8_t>(frame.samples[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  } else {
    write_pgm16(path, frame);
  }
}

}  // namespace cinesr
