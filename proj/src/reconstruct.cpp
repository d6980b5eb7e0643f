#include "dare/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dare {
namespace {

// Grid padding absorbing float rounding of stored sample positions.
constexpr double kGridGuard = 1e-5;

}  // namespace

Eigen::Vector3d pixel_to_world(const TrackedFrame& f, Eigen::Index u, Eigen::Index v)
{
  if (u < 0 || v < 0 || u >= f.width() || v >= f.height()) {
    std::ostringstream msg;
    msg << "pixel (" << u << ", " << v << ") outside " << f.width() << "x" << f.height() << " frame";
    throw std::invalid_argument(msg.str());
  }
  return f.pixel_to_world_unchecked(static_cast<double>(u), static_cast<double>(v));
}

void validate_sweep(const SweepRecording& sweep)
{
  if (sweep.frames.empty())
    throw std::invalid_argument("sweep has no frames");
  require_unit(sweep.calibration.rotation, "calibration rotation");
  const auto& first = sweep.frames.front();
  for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
    const auto& f = sweep.frames[i];
    if (!(f.pixel_pitch.array() > 0.0).all())
      throw std::invalid_argument("frame " + std::to_string(i) + ": pixel pitch must be positive");
    if (!std::isfinite(f.timestamp))
      throw std::invalid_argument("frame " + std::to_string(i) + ": timestamp is not finite");
    if (i > 0 && f.timestamp < sweep.frames[i - 1].timestamp)
      throw std::invalid_argument("frame " + std::to_string(i) + ": timestamps decrease");
    if (f.width() != first.width() || f.height() != first.height())
      throw std::invalid_argument("frame " + std::to_string(i) + ": dimensions differ from frame 0");
    require_unit(f.pose.rotation, "frame pose rotation");
  }
  if (sweep.mask && (sweep.mask->rows() != first.height() || sweep.mask->cols() != first.width()))
    throw std::invalid_argument("mask dimensions do not match the frames");
}

std::vector<TrackedFrame> image_plane_frames(const SweepRecording& sweep)
{
  std::vector<TrackedFrame> out;
  out.reserve(sweep.frames.size());
  for (const auto& f : sweep.frames) {
    TrackedFrame g = f;
    g.pose = compose(f.pose, sweep.calibration);
    out.push_back(std::move(g));
  }
  return out;
}

std::optional<Posed> interpolate_pose(std::span<const TimestampedPose> poses, double t)
{
  if (poses.empty() || !std::isfinite(t) || t < poses.front().timestamp || t > poses.back().timestamp)
    return std::nullopt;
  auto hi = std::lower_bound(poses.begin(), poses.end(), t,
                             [](const TimestampedPose& p, double time) { return p.timestamp < time; });
  if (hi->timestamp == t)
    return hi->pose;
  auto lo = std::prev(hi);
  const double span = hi->timestamp - lo->timestamp;
  const double s = span > 0.0 ? (t - lo->timestamp) / span : 0.0;
  return interpolate(lo->pose, hi->pose, s);
}

SyncResult synchronize(std::span<const TimestampedImage> images, std::span<const TimestampedPose> poses,
                       const Eigen::Vector2d& pixel_pitch)
{
  if (images.empty() || poses.empty())
    throw std::invalid_argument("synchronize needs non-empty image and pose streams");
  SyncResult result;
  for (const auto& img : images) {
    const auto pose = interpolate_pose(poses, img.timestamp);
    if (!pose) {
      ++result.dropped;
      continue;
    }
    TrackedFrame f;
    f.pixels = img.pixels;
    f.pixel_pitch = pixel_pitch;
    f.timestamp = img.timestamp;
    f.pose = *pose;
    result.frames.push_back(std::move(f));
  }
  if (result.frames.empty()) {
    std::ostringstream msg;
    msg << "no image timestamps overlap the pose stream: images span [" << images.front().timestamp << ", "
        << images.back().timestamp << "] s, poses span [" << poses.front().timestamp << ", "
        << poses.back().timestamp << "] s";
    throw std::runtime_error(msg.str());
  }
  return result;
}

BoundingBox compute_bounds(std::span<const TrackedFrame> frames, double margin)
{
  if (frames.empty())
    throw std::invalid_argument("compute_bounds needs at least one frame");
  BoundingBox box;
  for (const auto& f : frames) {
    const double w = static_cast<double>(f.width());
    const double h = static_cast<double>(f.height());
    for (const auto& [u, v] : {std::pair{0.0, 0.0}, {w, 0.0}, {0.0, h}, {w, h}})
      box.extend(f.pixel_to_world_unchecked(u, v));
  }
  box.min().array() -= margin;
  box.max().array() += margin;
  return box;
}

GridGeometry sweep_grid(std::span<const TrackedFrame> image_frames, double voxel_size, double margin)
{
  if (!(margin >= 0.0))
    throw std::invalid_argument("margin must be non-negative");
  BoundingBox box = compute_bounds(image_frames, margin);
  if ((box.sizes().array() <= 0.0).all())
    throw std::invalid_argument("degenerate sweep bounds: zero extent on every axis");
  box.min().array() -= kGridGuard;
  box.max().array() += kGridGuard;
  return grid_for_bounds(box, voxel_size);
}

DirectionalVolume reconstruct_volume(const SweepRecording& sweep, double voxel_size, double margin)
{
  validate_sweep(sweep);
  const std::vector<TrackedFrame> planes = image_plane_frames(sweep);
  VolumeBuilder builder(sweep_grid(planes, voxel_size, margin));

  std::size_t valid_pixels = sweep.frames.front().pixels.size();
  if (sweep.mask)
    valid_pixels = static_cast<std::size_t>(sweep.mask->count());
  builder.reserve(valid_pixels * sweep.frames.size());

  for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
    const TrackedFrame& plane = planes[i];
    const GrayImage& px = plane.pixels;
    for (Eigen::Index v = 0; v < px.rows(); ++v)
      for (Eigen::Index u = 0; u < px.cols(); ++u) {
        if (sweep.mask && !(*sweep.mask)(v, u))
          continue;
        builder.insert(plane.pixel_to_world_unchecked(double(u), double(v)), plane.pose.rotation, px(v, u));
      }
  }
  return std::move(builder).seal();
}

}  // namespace dare
