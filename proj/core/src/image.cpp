#include "satpose/image.hpp"

#include <fstream>

namespace satpose {

namespace {

/// Reads one PNM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

void write_pgm(const std::string& path, const ImageU8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("short write: " + path);
}

ImageU8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  if (next_token(in) != "P5") throw IoError(path + ": not a binary PGM (P5)");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (w <= 0 || h <= 0 || maxval != 255)
    throw IoError(path + ": unsupported PGM geometry");
  ImageU8 img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw IoError(path + ": truncated PGM data");
  return img;
}

void write_pbm(const std::string& path, const ImageU8& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mask: " + path);
  out << "P4\n" << mask.width << ' ' << mask.height << '\n';
  const int row_bytes = (mask.width + 7) / 8;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < mask.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y) != 0)
        row[static_cast<std::size_t>(x / 8)] |=
            static_cast<std::uint8_t>(0x80u >> (x % 8));
    out.write(reinterpret_cast<const char*>(row.data()), row_bytes);
  }
  if (!out) throw IoError("short write: " + path);
}

ImageU8 read_pbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask: " + path);
  if (next_token(in) != "P4") throw IoError(path + ": not a binary PBM (P4)");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  if (w <= 0 || h <= 0) throw IoError(path + ": bad PBM geometry");
  ImageU8 mask(w, h);
  const int row_bytes = (w + 7) / 8;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row_bytes);
    if (!in) throw IoError(path + ": truncated PBM data");
    for (int x = 0; x < w; ++x)
      mask.at(x, y) =
          (row[static_cast<std::size_t>(x / 8)] & (0x80u >> (x % 8))) ? 1 : 0;
  }
  return mask;
}

}  // namespace satpose
