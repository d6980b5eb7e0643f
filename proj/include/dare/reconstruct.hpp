#ifndef DARE_RECONSTRUCT_HPP
#define DARE_RECONSTRUCT_HPP

#include "dare/geometry.hpp"
#include "dare/image.hpp"
#include "dare/volume.hpp"

#include <optional>
#include <span>
#include <vector>

namespace dare {

/// A 2D frame placed in the world. Pixel (u, v) sits at pose * (u * pitch.x, v * pitch.y, 0).
struct TrackedFrame {
  GrayImage pixels;
  Eigen::Vector2d pixel_pitch = Eigen::Vector2d::Constant(0.1);  // mm/pixel (lateral, axial)
  double timestamp = 0.0;                                        // seconds
  Posed pose;

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }

  Eigen::Vector3d pixel_to_world_unchecked(double u, double v) const
  {
    return pose * Eigen::Vector3d(u * pixel_pitch.x(), v * pixel_pitch.y(), 0.0);
  }
};

/// Throws std::invalid_argument for pixels outside [0, width) x [0, height).
Eigen::Vector3d pixel_to_world(const TrackedFrame& f, Eigen::Index u, Eigen::Index v);

/// Recorded sweep. Frame poses are raw tracker (marker) poses; the image plane
/// pose of a frame is pose * calibration.
struct SweepRecording {
  std::vector<TrackedFrame> frames;
  Posed calibration;
  std::optional<Mask> mask;  // true = valid pixel; absent means the whole rectangle
};

/// Frames with calibration applied, i.e. poses of the image planes.
std::vector<TrackedFrame> image_plane_frames(const SweepRecording& sweep);

struct TimestampedPose {
  double timestamp = 0.0;
  Posed pose;
};

struct TimestampedImage {
  double timestamp = 0.0;
  GrayImage pixels;
};

/// Pose at time t by linear translation and slerp between the bracketing samples;
/// nullopt outside the stream's time range. `poses` must be sorted by timestamp.
std::optional<Posed> interpolate_pose(std::span<const TimestampedPose> poses, double t);

struct SyncResult {
  std::vector<TrackedFrame> frames;
  std::size_t dropped = 0;  // images outside the pose stream's time range
};

/// Pairs each image with the pose interpolated at its timestamp. Throws
/// std::runtime_error when no image falls inside the pose stream's time range.
SyncResult synchronize(std::span<const TimestampedImage> images, std::span<const TimestampedPose> poses,
                       const Eigen::Vector2d& pixel_pitch);

/// Box containing the four world corners of every frame rectangle, grown by margin.
BoundingBox compute_bounds(std::span<const TrackedFrame> frames, double margin);

DirectionalVolume reconstruct_volume(const SweepRecording& sweep, double voxel_size, double margin);

/// Grid used by reconstruct_volume and the baseline compounder for the same sweep.
GridGeometry sweep_grid(std::span<const TrackedFrame> image_frames, double voxel_size, double margin);

/// Throws std::invalid_argument when the sweep violates its invariants.
void validate_sweep(const SweepRecording& sweep);

}  // namespace dare

#endif  // DARE_RECONSTRUCT_HPP
