#include "dare/geometry.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace dare;
using Eigen::Vector3d;
using Q = Quaternion<double>;

namespace {

void check_vec(const Vector3d& a, const Vector3d& b, double tol = 1e-12)
{
  INFO("got " << a.transpose() << ", expected " << b.transpose());
  CHECK((a - b).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace

TEST_CASE("rotate examples")
{
  check_vec(rotate(Q::Identity(), Vector3d(1, 0, 0)), Vector3d(1, 0, 0));
  check_vec(rotate(axis_angle_deg(90.0, Vector3d::UnitZ()), Vector3d(1, 0, 0)), Vector3d(0, 1, 0));
  check_vec(rotate(axis_angle_deg(120.0, Vector3d(1, 1, 1)), Vector3d(1, 0, 0)), Vector3d(0, 1, 0));
}

TEST_CASE("rotate rejects non-unit quaternions beyond 1e-3")
{
  CHECK_THROWS_AS(rotate(Q(1.01, 0, 0, 0), Vector3d(1, 0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(rotate(Q(0, 0, 0, 0), Vector3d(1, 0, 0)), std::invalid_argument);
  CHECK_NOTHROW(rotate(Q(1.0005, 0, 0, 0), Vector3d(1, 0, 0)));
}

TEST_CASE("rotate preserves length")
{
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Q q = test::random_rotation(rng);
    const Vector3d v(n(rng), n(rng), n(rng));
    CHECK(std::abs(rotate(q, v).norm() - v.norm()) <= 1e-9 * v.norm());
  }
}

TEST_CASE("normalize yields unit norm")
{
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Q q = Q(n(rng), n(rng), n(rng), n(rng)).normalized();
    CHECK(std::abs(q.norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("frame_axes examples")
{
  Posed p;
  auto a = frame_axes(p);
  check_vec(a.x_axis, Vector3d::UnitX());
  check_vec(a.y_axis, Vector3d::UnitY());
  check_vec(a.normal, Vector3d::UnitZ());

  p.rotation = axis_angle_deg(25.0, Vector3d::UnitX());
  check_vec(frame_axes(p).normal, Vector3d(0, -0.42262, 0.90631), 1e-5);

  p.rotation = axis_angle_deg(180.0, Vector3d::UnitY());
  check_vec(frame_axes(p).x_axis, Vector3d(-1, 0, 0));
}

TEST_CASE("frame_axes is a right-handed orthonormal triad")
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    Posed p;
    p.rotation = test::random_rotation(rng);
    const auto a = frame_axes(p);
    CHECK(std::abs(a.x_axis.dot(a.y_axis)) <= 1e-6);
    CHECK(std::abs(a.x_axis.dot(a.normal)) <= 1e-6);
    CHECK(std::abs(a.y_axis.dot(a.normal)) <= 1e-6);
    CHECK((a.x_axis.cross(a.y_axis) - a.normal).norm() <= 1e-6);
    Eigen::Matrix3d m;
    m << a.x_axis, a.y_axis, a.normal;
    CHECK(std::abs(m.determinant() - 1.0) <= 1e-6);
  }
}

TEST_CASE("slerp examples")
{
  const Q q0 = axis_angle_deg(10.0, Vector3d::UnitX());
  const Q q1 = axis_angle_deg(50.0, Vector3d::UnitX());
  CHECK(same_rotation(slerp(q0, q1, 0.0), q0));
  CHECK(same_rotation(slerp(q0, q1, 1.0), q1));
  CHECK(same_rotation(slerp(Q::Identity(), axis_angle_deg(90.0, Vector3d::UnitZ()), 0.5),
                      axis_angle_deg(45.0, Vector3d::UnitZ())));
  CHECK(same_rotation(slerp(q0, q1, 0.25), axis_angle_deg(20.0, Vector3d::UnitX())));
}

TEST_CASE("slerp takes the short arc for antipodal representatives")
{
  const Q q0 = axis_angle_deg(10.0, Vector3d::UnitZ());
  Q q1 = axis_angle_deg(30.0, Vector3d::UnitZ());
  q1.coeffs() = -q1.coeffs();
  const Q mid = slerp(q0, q1, 0.5);
  CHECK(same_rotation(mid, axis_angle_deg(20.0, Vector3d::UnitZ())));
  CHECK(std::abs(mid.norm() - 1.0) <= 1e-12);
}

TEST_CASE("slerp is symmetric under reversal")
{
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> t(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const Q a = test::random_rotation(rng), b = test::random_rotation(rng);
    const double s = t(rng);
    CHECK(same_rotation(slerp(a, b, s), slerp(b, a, 1.0 - s), 1e-9));
    CHECK(std::abs(slerp(a, b, s).norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("compose with inverse is identity")
{
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int i = 0; i < 300; ++i) {
    Posed p;
    p.rotation = test::random_rotation(rng);
    p.translation = Vector3d(n(rng), n(rng), n(rng));
    for (const Posed& id : {compose(p, inverse(p)), compose(inverse(p), p)}) {
      CHECK(same_rotation(id.rotation, Q::Identity()));
      CHECK(id.translation.norm() <= 1e-6);
    }
  }
}

TEST_CASE("pose maps points through rotation then translation")
{
  Posed p;
  p.rotation = axis_angle_deg(90.0, Vector3d::UnitZ());
  p.translation = Vector3d(5, 0, 0);
  check_vec(p * Vector3d(1, 0, 0), Vector3d(5, 1, 0));
  Posed q;
  q.translation = Vector3d(0, 0, 2);
  check_vec(compose(p, q) * Vector3d(1, 0, 0), p * (q * Vector3d(1, 0, 0)));
}

TEST_CASE("canonicalize picks w >= 0 and keeps the rotation")
{
  const Q q(-0.5, 0.5, -0.5, 0.5);
  const Q c = canonicalize(q);
  CHECK(c.w() >= 0.0);
  CHECK(same_rotation(q, c));
  CHECK(same_rotation(q, Q(-q.coeffs())));
  CHECK_FALSE(same_rotation(Q::Identity(), axis_angle_deg(1.0, Vector3d::UnitX())));
}

TEST_CASE("degree conversions")
{
  CHECK(deg2rad(180.0) == doctest::Approx(std::numbers::pi));
  CHECK(rad2deg(std::numbers::pi / 2) == doctest::Approx(90.0));
}
