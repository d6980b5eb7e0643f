#ifndef DARE_BASELINE_HPP
#define DARE_BASELINE_HPP

#include "dare/reconstruct.hpp"
#include "dare/reslice.hpp"
#include "dare/volume.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace dare {

enum class VoxelState : std::uint8_t { Empty = 0, Observed = 1, Filled = 2 };

/// Direction-agnostic mean-compounded volume.
struct ScalarVolume {
  GridGeometry grid;
  std::vector<double> accum;
  std::vector<std::uint32_t> count;
  std::vector<float> value;
  std::vector<VoxelState> state;

  explicit ScalarVolume(GridGeometry g = {});

  /// Adds one intensity to the voxel holding p; false (and no change) outside the grid.
  bool add(const Eigen::Vector3d& p, double intensity);

  /// value = accum / count for every voxel that received samples.
  void seal();

  /// Value used for interpolation, nullopt for empty voxels.
  std::optional<float> at(const CellIndex& c) const
  {
    if (!grid.contains(c))
      return std::nullopt;
    const std::size_t i = grid.linear(c);
    if (state[i] == VoxelState::Empty)
      return std::nullopt;
    return value[i];
  }
};

/// Mean compounding of every unmasked pixel; same grid as reconstruct_volume.
ScalarVolume compound(const SweepRecording& sweep, double voxel_size, double margin);

/// Iterative 26-neighbour mean hole filling. Each pass reads only the previous pass's state.
ScalarVolume fill_holes(ScalarVolume v, int max_passes = 3);

/// Trilinear value at a world point, weights renormalized over non-empty corners.
std::optional<double> sample_trilinear(const ScalarVolume& v, const Eigen::Vector3d& p);

ResliceImage reslice_trilinear(const ScalarVolume& v, const ReslicePlane& plane);

// .scalarvol: .darevol-style header (magic "DARS"), then f32 values and u8 states per voxel.
void save_scalar_volume(const ScalarVolume& v, const std::filesystem::path& path);
ScalarVolume load_scalar_volume(const std::filesystem::path& path);

}  // namespace dare

#endif  // DARE_BASELINE_HPP
