#ifndef DARE_IMAGE_HPP
#define DARE_IMAGE_HPP

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>

namespace dare {

/// Row-major 2D arrays indexed (row = v = depth, col = u = lateral).
using GrayImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Reslice output: gray levels plus a coverage flag per pixel.
struct ResliceImage {
  GrayImage pixels;
  Mask coverage;
  double elapsed_ms = 0.0;

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
};

// Binary portable graymap (P5) and bitmap (P4) files.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pbm(const std::filesystem::path& path, const Mask& mask);
Mask read_pbm(const std::filesystem::path& path);

/// Writes `<path>` as PGM and the coverage sidecar as `<path>.mask.pbm`.
void write_reslice(const std::filesystem::path& path, const ResliceImage& img);
ResliceImage read_reslice(const std::filesystem::path& path);
std::filesystem::path coverage_path(const std::filesystem::path& image_path);

}  // namespace dare

#endif  // DARE_IMAGE_HPP
