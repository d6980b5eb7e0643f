#include "dare/reslice.hpp"

#include "dare/parallel.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dare {
namespace {

constexpr double kMinWeightSum = 1e-12;

// Everything the per-sample kernel needs, resolved once per reslice call.
struct Kernel {
  FrameAxes<double> plane;
  double cos_normal;
  double cos_inplane;
  double radius;
  ResliceConfig cfg;

  explicit Kernel(const ReslicePlane& p, const ResliceConfig& c)
      : plane(frame_axes(p.pose)),
        cos_normal(std::cos(deg2rad(c.normal_threshold))),
        cos_inplane(std::cos(deg2rad(c.inplane_threshold))),
        radius(c.interp_radius),
        cfg(c)
  {
  }
};

// Lateral axis and normal of a stored orientation: columns 0 and 2 of R(q).
inline void sample_axes(const DirectionalSample& s, Eigen::Vector3d& x_axis, Eigen::Vector3d& normal)
{
  const double w = s.orientation.w(), x = s.orientation.x(), y = s.orientation.y(), z = s.orientation.z();
  x_axis = Eigen::Vector3d(1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y));
  normal = Eigen::Vector3d(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y));
}

struct PixelSum {
  double weight = 0.0;
  double weighted_intensity = 0.0;

  void add(const DirectionalSample& s, const Eigen::Vector3d& p, const Kernel& k)
  {
    Eigen::Vector3d x_s, n_s;
    sample_axes(s, x_s, n_s);
    const Dots d{n_s.dot(k.plane.normal), std::abs(x_s.dot(k.plane.x_axis))};
    if (d.normal < k.cos_normal || d.inplane < k.cos_inplane)
      return;
    const double dist = (s.position.cast<double>() - p).norm();
    const double w = sample_weight(d, dist, k.cfg);
    weight += w;
    weighted_intensity += w * s.intensity;
  }

  void store(ResliceImage& out, int u, int v, std::uint8_t unassigned) const
  {
    if (weight < kMinWeightSum) {
      out.pixels(v, u) = unassigned;
      out.coverage(v, u) = false;
      return;
    }
    const long value = std::lround(weighted_intensity / weight);
    out.pixels(v, u) = static_cast<std::uint8_t>(std::clamp(value, 0L, 255L));
    out.coverage(v, u) = true;
  }
};

template <typename PixelFn>
ResliceImage run_reslice(const ReslicePlane& plane, const ResliceConfig& cfg, PixelFn&& pixel)
{
  const auto start = std::chrono::steady_clock::now();
  validate_plane(plane);
  cfg.validate();
  const Kernel kernel(plane, cfg);

  ResliceImage out;
  out.pixels.resize(plane.height, plane.width);
  out.coverage.resize(plane.height, plane.width);
  parallel_for(plane.height, [&](int v) {
    for (int u = 0; u < plane.width; ++u) {
      const Eigen::Vector3d p = plane.pixel_to_world(u, v);
      PixelSum sum;
      pixel(p, kernel, sum);
      sum.store(out, u, v, cfg.unassigned_value);
    }
  });
  out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

void validate_plane(const ReslicePlane& plane)
{
  if (plane.width <= 0 || plane.height <= 0)
    throw std::invalid_argument("reslice plane has no pixels (" + std::to_string(plane.width) + "x" +
                                std::to_string(plane.height) + ")");
  if (!(plane.pixel_pitch.array() > 0.0).all() || !plane.pixel_pitch.allFinite())
    throw std::invalid_argument("reslice plane pixel pitch must be positive");
  if (!plane.pose.translation.allFinite())
    throw std::invalid_argument("reslice plane translation is not finite");
  require_unit(plane.pose.rotation, "pose.rotation");
}

void ResliceConfig::validate() const
{
  if (!(interp_radius > 0.0) || !std::isfinite(interp_radius))
    throw std::invalid_argument("interp_radius must be positive");
  if (!(normal_threshold > 0.0 && normal_threshold < 90.0))
    throw std::invalid_argument("normal_threshold must lie in (0, 90) degrees");
  if (!(inplane_threshold > 0.0 && inplane_threshold < 90.0))
    throw std::invalid_argument("inplane_threshold must lie in (0, 90) degrees");
  if (!(k_normal >= 0.0) || !(k_inplane >= 0.0) || !(k_dist >= 0.0))
    throw std::invalid_argument("weighting exponents must be non-negative");
}

Dots directional_dots(const FrameAxes<double>& sample_axes, const FrameAxes<double>& plane_axes)
{
  return {sample_axes.normal.dot(plane_axes.normal), std::abs(sample_axes.x_axis.dot(plane_axes.x_axis))};
}

bool accept(const Dots& d, const ResliceConfig& cfg)
{
  return d.normal >= std::cos(deg2rad(cfg.normal_threshold)) && d.inplane >= std::cos(deg2rad(cfg.inplane_threshold));
}

double sample_weight(const Dots& d, double dist, const ResliceConfig& cfg)
{
  // With k_dist == 0 the last term is -0.0 and the exponent equals the pure orientation term bit for bit.
  return std::exp(cfg.k_normal * (d.normal - 1.0) + cfg.k_inplane * (d.inplane - 1.0) -
                  cfg.k_dist * dist / cfg.interp_radius);
}

ResliceImage reslice(const DirectionalVolume& v, const ReslicePlane& plane, const ResliceConfig& cfg)
{
  return run_reslice(plane, cfg, [&](const Eigen::Vector3d& p, const Kernel& k, PixelSum& sum) {
    v.for_each_in_cube(p, k.radius, [&](const DirectionalSample& s) { sum.add(s, p, k); });
  });
}

ResliceImage reslice_bruteforce(const DirectionalVolume& v, const ReslicePlane& plane, const ResliceConfig& cfg)
{
  return run_reslice(plane, cfg, [&](const Eigen::Vector3d& p, const Kernel& k, PixelSum& sum) {
    for (const DirectionalSample& s : v.samples())
      if (in_cube(s, p, k.radius))
        sum.add(s, p, k);
  });
}

}  // namespace dare
