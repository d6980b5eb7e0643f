#ifndef DARE_RESLICE_HPP
#define DARE_RESLICE_HPP

#include "dare/geometry.hpp"
#include "dare/image.hpp"
#include "dare/volume.hpp"

namespace dare {

/// Virtual image plane; same pixel convention as TrackedFrame.
struct ReslicePlane {
  Posed pose;
  int width = 0;
  int height = 0;
  Eigen::Vector2d pixel_pitch = Eigen::Vector2d::Constant(0.125);

  Eigen::Vector3d pixel_to_world(int u, int v) const
  {
    return pose * Eigen::Vector3d(u * pixel_pitch.x(), v * pixel_pitch.y(), 0.0);
  }
};

/// Throws std::invalid_argument for empty planes, non-positive pitch or a non-unit rotation.
void validate_plane(const ReslicePlane& plane);

struct ResliceConfig {
  double interp_radius = 0.125;      // mm, half-width of the candidate cube
  double normal_threshold = 25.0;    // degrees
  double inplane_threshold = 15.0;   // degrees
  double k_normal = 10.0;
  double k_inplane = 5.0;
  double k_dist = 2.0;               // 0 disables distance weighting
  std::uint8_t unassigned_value = 0;

  void validate() const;
};

/// Alignment between a sample's acquisition axes and the reslice plane.
struct Dots {
  double normal = 0.0;   // n_s . n_r, signed
  double inplane = 0.0;  // |x_s . x_r|
};

Dots directional_dots(const FrameAxes<double>& sample_axes, const FrameAxes<double>& plane_axes);

bool accept(const Dots& d, const ResliceConfig& cfg);

/// exp[k_n (d_n - 1) + k_i (d_i - 1) - k_d dist / radius]
double sample_weight(const Dots& d, double dist, const ResliceConfig& cfg);

/// Directional reslice through the grid-accelerated neighbourhood query.
ResliceImage reslice(const DirectionalVolume& v, const ReslicePlane& plane, const ResliceConfig& cfg = {});

/// Same contract as reslice, scanning the whole sample store for every pixel.
ResliceImage reslice_bruteforce(const DirectionalVolume& v, const ReslicePlane& plane, const ResliceConfig& cfg = {});

}  // namespace dare

#endif  // DARE_RESLICE_HPP
