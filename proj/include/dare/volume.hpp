#ifndef DARE_VOLUME_HPP
#define DARE_VOLUME_HPP

#include "dare/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dare {

using BoundingBox = Eigen::AlignedBox3d;
using CellIndex = Eigen::Array3i;

/// Raised when a sample falls outside the grid it is inserted into.
class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// One acquired pixel: exact world position, probe rotation at acquisition, gray level.
struct DirectionalSample {
  Eigen::Matrix<float, 3, 1, Eigen::DontAlign> position;
  Eigen::Quaternion<float, Eigen::DontAlign> orientation;
  std::uint8_t intensity = 0;
};
static_assert(sizeof(DirectionalSample) == 32);

/// Regular isotropic grid with half-open cells [origin + i*h, origin + (i+1)*h).
struct GridGeometry {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 0.125;
  CellIndex dims = CellIndex::Zero();

  std::size_t cell_count() const
  {
    return static_cast<std::size_t>(dims.x()) * static_cast<std::size_t>(dims.y()) *
           static_cast<std::size_t>(dims.z());
  }

  bool contains(const CellIndex& c) const { return (c >= 0).all() && (c < dims).all(); }

  std::size_t linear(const CellIndex& c) const
  {
    return static_cast<std::size_t>(c.x()) +
           static_cast<std::size_t>(dims.x()) *
               (static_cast<std::size_t>(c.y()) + static_cast<std::size_t>(dims.y()) * static_cast<std::size_t>(c.z()));
  }

  /// Unbounded floor index; may lie outside the grid.
  CellIndex raw_index(const Eigen::Vector3d& p) const
  {
    const Eigen::Array3d f = ((p - origin) / voxel_size).array().floor();
    return f.cast<int>();
  }

  /// Cell holding p, or nullopt outside the grid. Never clamps.
  std::optional<CellIndex> voxel_of(const Eigen::Vector3d& p) const
  {
    const Eigen::Array3d f = ((p - origin) / voxel_size).array().floor();
    if (!f.allFinite() || (f < 0).any() || (f >= dims.cast<double>()).any())
      return std::nullopt;
    return f.cast<int>();
  }

  Eigen::Vector3d cell_center(const CellIndex& c) const
  {
    return origin + voxel_size * (c.cast<double>() + 0.5).matrix();
  }

  BoundingBox bounds() const
  {
    return BoundingBox(origin, origin + voxel_size * dims.cast<double>().matrix());
  }
};

/// Grid with its minimum corner at box.min() and enough cells to cover box.max().
GridGeometry grid_for_bounds(const BoundingBox& box, double voxel_size);

/// Inclusive cell range [lo, hi] touched by the cube |q - p|_inf <= radius, clipped to the grid.
/// Empty when hi < lo on some axis.
struct CellRange {
  CellIndex lo, hi;
  bool empty() const { return (hi < lo).any(); }
  std::size_t size() const
  {
    return empty() ? 0 : static_cast<std::size_t>((hi - lo + 1).prod());
  }
};
CellRange cells_in_cube(const GridGeometry& grid, const Eigen::Vector3d& p, double radius);

/// Chebyshev (cube) predicate shared by every neighbourhood query.
inline bool in_cube(const DirectionalSample& s, const Eigen::Vector3d& p, double radius)
{
  const Eigen::Vector3d d = s.position.cast<double>() - p;
  return d.cwiseAbs().maxCoeff() <= radius;
}

/// Sealed, immutable directional volume: per-cell runs in one contiguous sample store.
class DirectionalVolume {
 public:
  DirectionalVolume() = default;
  DirectionalVolume(GridGeometry grid, std::vector<std::uint64_t> offsets, std::vector<DirectionalSample> samples);

  const GridGeometry& grid() const { return grid_; }
  std::span<const DirectionalSample> samples() const { return samples_; }
  std::size_t sample_count() const { return samples_.size(); }

  std::span<const DirectionalSample> cell(std::size_t linear) const
  {
    return std::span<const DirectionalSample>(samples_).subspan(offsets_[linear], offsets_[linear + 1] - offsets_[linear]);
  }
  std::span<const DirectionalSample> cell(const CellIndex& c) const { return cell(grid_.linear(c)); }
  std::uint64_t offset(std::size_t linear) const { return offsets_[linear]; }
  std::uint32_t count(std::size_t linear) const
  {
    return static_cast<std::uint32_t>(offsets_[linear + 1] - offsets_[linear]);
  }

  std::optional<CellIndex> voxel_of(const Eigen::Vector3d& p) const { return grid_.voxel_of(p); }

  /// Visits samples inside the cube around p in flat-store order.
  template <typename Fn>
  void for_each_in_cube(const Eigen::Vector3d& p, double radius, Fn&& fn) const
  {
    const CellRange range = cells_in_cube(grid_, p, radius);
    if (range.empty())
      return;
    for (int z = range.lo.z(); z <= range.hi.z(); ++z)
      for (int y = range.lo.y(); y <= range.hi.y(); ++y) {
        const std::size_t row = grid_.linear(CellIndex(range.lo.x(), y, z));
        const std::size_t begin = offsets_[row];
        const std::size_t end = offsets_[row + static_cast<std::size_t>(range.hi.x() - range.lo.x()) + 1];
        for (std::size_t i = begin; i < end; ++i)
          if (in_cube(samples_[i], p, radius))
            fn(samples_[i]);
      }
  }

  std::vector<DirectionalSample> gather_neighborhood(const Eigen::Vector3d& p, double radius) const;

 private:
  GridGeometry grid_;
  std::vector<std::uint64_t> offsets_{0};  // cell_count + 1 entries
  std::vector<DirectionalSample> samples_;
};

/// Single-writer staging area; seal() performs the count/fill pass into contiguous cell runs.
class VolumeBuilder {
 public:
  explicit VolumeBuilder(GridGeometry grid);

  const GridGeometry& grid() const { return grid_; }
  std::size_t size() const { return staged_.size(); }
  void reserve(std::size_t n);

  /// Appends s to its owning cell. Throws OutOfBounds (and stores nothing) outside the grid.
  void insert(const DirectionalSample& s);

  /// Builds the sample from a world position; position is rounded to float before assignment.
  void insert(const Eigen::Vector3d& position, const Quaternion<double>& orientation, std::uint8_t intensity);

  DirectionalVolume seal() &&;

 private:
  GridGeometry grid_;
  std::vector<DirectionalSample> staged_;
  std::vector<std::uint64_t> staged_cell_;
};

// .darevol binary format (little-endian), see README for the layout.
void save_volume(const DirectionalVolume& v, const std::filesystem::path& path);
DirectionalVolume load_volume(const std::filesystem::path& path);

}  // namespace dare

#endif  // DARE_VOLUME_HPP
