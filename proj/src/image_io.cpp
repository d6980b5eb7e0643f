#include "dare/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dare {
namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Reads the "Px W H [maxval]" header, skipping comments.
struct NetpbmHeader {
  std::string magic;
  long width = 0, height = 0, maxval = 1;
};

std::string next_token(std::istream& in)
{
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty())
        return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path, bool has_maxval)
{
  NetpbmHeader h;
  h.magic = next_token(in);
  try {
    h.width = std::stol(next_token(in));
    h.height = std::stol(next_token(in));
    if (has_maxval)
      h.maxval = std::stol(next_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": malformed netpbm header");
  }
  if (h.width <= 0 || h.height <= 0)
    throw std::runtime_error(path.string() + ": invalid image dimensions");
  return h;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& img)
{
  auto out = open_out(path);
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), img.size());
}

GrayImage read_pgm(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path, true);
  if (h.magic != "P5" || h.maxval != 255)
    throw std::runtime_error(path.string() + ": expected 8-bit binary PGM (P5)");
  GrayImage img(h.height, h.width);
  in.read(reinterpret_cast<char*>(img.data()), img.size());
  if (in.gcount() != img.size())
    throw std::runtime_error(path.string() + ": truncated pixel data");
  return img;
}

void write_pbm(const std::filesystem::path& path, const Mask& mask)
{
  auto out = open_out(path);
  out << "P4\n" << mask.cols() << ' ' << mask.rows() << '\n';
  const Eigen::Index row_bytes = (mask.cols() + 7) / 8;
  std::string row(static_cast<std::size_t>(row_bytes), '\0');
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    std::fill(row.begin(), row.end(), '\0');
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      if (mask(r, c))
        row[static_cast<std::size_t>(c / 8)] |= static_cast<char>(0x80 >> (c % 8));
    out.write(row.data(), row_bytes);
  }
}

Mask read_pbm(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path, false);
  if (h.magic != "P4")
    throw std::runtime_error(path.string() + ": expected binary PBM (P4)");
  Mask mask(h.height, h.width);
  const long row_bytes = (h.width + 7) / 8;
  std::string row(static_cast<std::size_t>(row_bytes), '\0');
  for (long r = 0; r < h.height; ++r) {
    in.read(row.data(), row_bytes);
    if (in.gcount() != row_bytes)
      throw std::runtime_error(path.string() + ": truncated bitmap");
    for (long c = 0; c < h.width; ++c)
      mask(r, c) = (static_cast<unsigned char>(row[static_cast<std::size_t>(c / 8)]) >> (7 - c % 8)) & 1;
  }
  return mask;
}

std::filesystem::path coverage_path(const std::filesystem::path& image_path)
{
  return std::filesystem::path(image_path.string() + ".mask.pbm");
}

void write_reslice(const std::filesystem::path& path, const ResliceImage& img)
{
  write_pgm(path, img.pixels);
  write_pbm(coverage_path(path), img.coverage);
}

ResliceImage read_reslice(const std::filesystem::path& path)
{
  ResliceImage img;
  img.pixels = read_pgm(path);
  const auto mpath = coverage_path(path);
  if (std::filesystem::exists(mpath)) {
    img.coverage = read_pbm(mpath);
    if (img.coverage.rows() != img.pixels.rows() || img.coverage.cols() != img.pixels.cols())
      throw std::runtime_error(mpath.string() + ": coverage dims do not match image");
  } else {
    img.coverage = Mask::Constant(img.pixels.rows(), img.pixels.cols(), true);
  }
  return img;
}

}  // namespace dare
