#ifndef DARE_GEOMETRY_HPP
#define DARE_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace dare {

template <typename Scalar> using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Quaternion = Eigen::Quaternion<Scalar>;

/// Tolerance on |q| - 1 beyond which a quaternion is rejected as a rotation.
inline constexpr double kUnitTolerance = 1e-3;

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) { return deg * std::numbers::pi_v<Scalar> / Scalar(180); }

template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) { return rad * Scalar(180) / std::numbers::pi_v<Scalar>; }

template <typename Scalar>
bool is_unit(const Quaternion<Scalar>& q, double tol = kUnitTolerance)
{
  return std::isfinite(q.norm()) && std::abs(q.norm() - Scalar(1)) <= tol;
}

template <typename Scalar>
void require_unit(const Quaternion<Scalar>& q, const char* what = "quaternion")
{
  if (!is_unit(q))
    throw std::invalid_argument(std::string(what) + " is not a unit quaternion (|q| = " +
                                std::to_string(double(q.norm())) + ")");
}

/// Picks the representative with w >= 0 so that q and -q compare and store identically.
template <typename Scalar>
Quaternion<Scalar> canonicalize(const Quaternion<Scalar>& q)
{
  Quaternion<Scalar> n = q.normalized();
  if (n.w() < Scalar(0))
    n.coeffs() = -n.coeffs();
  return n;
}

/// True when q0 and q1 describe the same rotation (q and -q are the same rotation).
template <typename Scalar>
bool same_rotation(const Quaternion<Scalar>& q0, const Quaternion<Scalar>& q1, Scalar tol = Scalar(1e-6))
{
  return Scalar(1) - std::abs(q0.normalized().dot(q1.normalized())) <= tol;
}

template <typename Scalar>
Quaternion<Scalar> axis_angle_deg(Scalar degrees, const std::type_identity_t<Vector3<Scalar>>& axis)
{
  return Quaternion<Scalar>(Eigen::AngleAxis<Scalar>(deg2rad(degrees), axis.normalized()));
}

/// R(q) v. Throws std::invalid_argument for quaternions that are not unit within kUnitTolerance.
template <typename Scalar>
Vector3<Scalar> rotate(const Quaternion<Scalar>& q, const std::type_identity_t<Vector3<Scalar>>& v)
{
  require_unit(q);
  return q.normalized() * v;
}

/// Rigid transform mapping a local frame into the world frame: x_world = R x_local + t.
template <typename Scalar>
struct Pose {
  Quaternion<Scalar> rotation = Quaternion<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  static Pose Identity() { return {}; }

  Vector3<Scalar> operator*(const Vector3<Scalar>& p) const { return rotation * p + translation; }

  template <typename Other>
  Pose<Other> cast() const
  {
    return {rotation.template cast<Other>(), translation.template cast<Other>()};
  }
};

using Posed = Pose<double>;

/// (a * b) maps b's local frame through a into the world.
template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b)
{
  return {(a.rotation * b.rotation).normalized(), a.rotation * b.translation + a.translation};
}

template <typename Scalar>
Pose<Scalar> inverse(const Pose<Scalar>& p)
{
  const Quaternion<Scalar> r = p.rotation.conjugate();
  return {r, -(r * p.translation)};
}

/// World-frame axes of an image plane: x lateral, y depth (beam), normal out of plane.
template <typename Scalar>
struct FrameAxes {
  Vector3<Scalar> x_axis;
  Vector3<Scalar> y_axis;
  Vector3<Scalar> normal;
};

template <typename Scalar>
FrameAxes<Scalar> frame_axes(const Pose<Scalar>& p)
{
  const auto m = p.rotation.toRotationMatrix();
  return {m.col(0), m.col(1), m.col(2)};
}

/// Shortest-arc spherical interpolation; the result is normalized.
template <typename Scalar>
Quaternion<Scalar> slerp(const Quaternion<Scalar>& q0, const Quaternion<Scalar>& q1, Scalar t)
{
  // Eigen flips the sign of q1 when the pair lies on opposite hemispheres.
  return q0.slerp(t, q1).normalized();
}

template <typename Scalar>
Pose<Scalar> interpolate(const Pose<Scalar>& a, const Pose<Scalar>& b, Scalar t)
{
  return {slerp(a.rotation, b.rotation, t), (Scalar(1) - t) * a.translation + t * b.translation};
}

}  // namespace dare

#endif  // DARE_GEOMETRY_HPP
