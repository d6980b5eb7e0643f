#include "dare/phantom.hpp"
#include "dare/reconstruct.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace dare;
using Eigen::Vector3d;

namespace {

TrackedFrame frame(int w, int h, double pitch, const Posed& pose = {}, std::uint8_t fill = 0)
{
  TrackedFrame f;
  f.pixels = GrayImage::Constant(h, w, fill);
  f.pixel_pitch = Eigen::Vector2d::Constant(pitch);
  f.pose = pose;
  return f;
}

void check_vec(const Vector3d& a, const Vector3d& b, double tol = 1e-12)
{
  INFO("got " << a.transpose() << ", expected " << b.transpose());
  CHECK((a - b).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace

TEST_CASE("pixel_to_world examples")
{
  auto f = frame(100, 100, 0.1);
  check_vec(pixel_to_world(f, 0, 0), Vector3d::Zero());
  check_vec(pixel_to_world(f, 10, 20), Vector3d(1.0, 2.0, 0.0));
  f.pose.translation = Vector3d(5, 0, 0);
  f.pose.rotation = axis_angle_deg(90.0, Vector3d::UnitZ());
  check_vec(pixel_to_world(f, 10, 0), Vector3d(5, 1, 0));
  CHECK_THROWS_AS(pixel_to_world(f, 100, 0), std::invalid_argument);
  CHECK_THROWS_AS(pixel_to_world(f, 0, -1), std::invalid_argument);
}

TEST_CASE("compute_bounds examples")
{
  std::vector<TrackedFrame> frames{frame(100, 100, 0.1)};
  auto b = compute_bounds(frames, 0.0);
  check_vec(b.min(), Vector3d::Zero());
  check_vec(b.max(), Vector3d(10, 10, 0));
  b = compute_bounds(frames, 1.0);
  check_vec(b.min(), Vector3d(-1, -1, -1));
  check_vec(b.max(), Vector3d(11, 11, 1));
  CHECK_THROWS_AS(compute_bounds(std::vector<TrackedFrame>{}, 0.0), std::invalid_argument);
}

TEST_CASE("compute_bounds of two frames rotated about their shared top edge")
{
  // Top edge is the lateral (x) edge at depth 0; rotating about x tilts the frames
  // forward and backward around it.
  Posed a, b;
  a.rotation = axis_angle_deg(45.0, Vector3d::UnitX());
  b.rotation = axis_angle_deg(-45.0, Vector3d::UnitX());
  std::vector<TrackedFrame> frames{frame(40, 20, 0.25, a), frame(40, 20, 0.25, b)};
  BoundingBox oracle;
  for (const auto& f : frames)
    for (double u : {0.0, 10.0})
      for (double v : {0.0, 5.0})
        oracle.extend(f.pose * Vector3d(u, v, 0.0));
  const auto box = compute_bounds(frames, 0.0);
  check_vec(box.min(), oracle.min());
  check_vec(box.max(), oracle.max());
  const double s = 5.0 * std::sqrt(0.5);
  check_vec(box.min(), Vector3d(0, 0, -s), 1e-12);
  check_vec(box.max(), Vector3d(10, s, s), 1e-12);
}

TEST_CASE("synchronize examples")
{
  const Eigen::Vector2d pitch(0.1, 0.1);
  const GrayImage img = GrayImage::Zero(2, 2);
  SUBCASE("exact timestamp returns the pose unchanged")
  {
    Posed p;
    p.translation = Vector3d(1, 2, 3);
    p.rotation = axis_angle_deg(33.0, Vector3d(1, 2, 3));
    std::vector<TimestampedPose> poses{{0.5, Posed{}}, {1.0, p}, {2.0, Posed{}}};
    std::vector<TimestampedImage> images{{1.0, img}};
    const auto r = synchronize(images, poses, pitch);
    REQUIRE(r.frames.size() == 1);
    CHECK(r.frames[0].pose.translation == p.translation);
    CHECK(r.frames[0].pose.rotation.coeffs() == p.rotation.coeffs());
  }
  SUBCASE("midpoint translation")
  {
    Posed p0, p1;
    p1.translation = Vector3d(10, 0, 0);
    std::vector<TimestampedPose> poses{{1.0, p0}, {2.0, p1}};
    std::vector<TimestampedImage> images{{1.5, img}};
    check_vec(synchronize(images, poses, pitch).frames[0].pose.translation, Vector3d(5, 0, 0));
  }
  SUBCASE("slerp between bracketing rotations")
  {
    Posed p0, p1;
    p1.rotation = axis_angle_deg(40.0, Vector3d::UnitZ());
    std::vector<TimestampedPose> poses{{1.0, p0}, {2.0, p1}};
    std::vector<TimestampedImage> images{{1.25, img}};
    CHECK(same_rotation(synchronize(images, poses, pitch).frames[0].pose.rotation,
                        axis_angle_deg(10.0, Vector3d::UnitZ())));
  }
  SUBCASE("images outside the pose stream are dropped and counted")
  {
    std::vector<TimestampedPose> poses{{1.0, Posed{}}, {2.0, Posed{}}};
    std::vector<TimestampedImage> images{{0.5, img}, {1.5, img}, {2.5, img}, {3.0, img}};
    const auto r = synchronize(images, poses, pitch);
    CHECK(r.frames.size() == 1);
    CHECK(r.dropped == 3);
  }
  SUBCASE("no overlap is an error with a diagnostic")
  {
    std::vector<TimestampedPose> poses{{1.0, Posed{}}, {2.0, Posed{}}};
    std::vector<TimestampedImage> images{{5.0, img}};
    CHECK_THROWS_WITH_AS(synchronize(images, poses, pitch), doctest::Contains("no image timestamps overlap"),
                         std::runtime_error);
  }
}

TEST_CASE("reconstruct_volume examples")
{
  SUBCASE("one 1x1 frame")
  {
    SweepRecording s;
    s.frames.push_back(frame(1, 1, 0.1, {}, 128));
    const auto v = reconstruct_volume(s, 0.125, 0.5);
    REQUIRE(v.sample_count() == 1);
    CHECK(v.samples()[0].intensity == 128);
    CHECK(same_rotation(v.samples()[0].orientation.cast<double>(), Quaternion<double>::Identity()));
  }
  SUBCASE("two frames at one pose share a voxel")
  {
    SweepRecording s;
    s.frames.push_back(frame(1, 1, 0.1, {}, 100));
    s.frames.push_back(frame(1, 1, 0.1, {}, 200));
    s.frames[1].timestamp = 0.1;
    const auto v = reconstruct_volume(s, 0.125, 0.5);
    REQUIRE(v.sample_count() == 2);
    const auto c = v.voxel_of(v.samples()[0].position.cast<double>());
    const auto cell = v.cell(*c);
    REQUIRE(cell.size() == 2);
    CHECK(cell[0].intensity == 100);
    CHECK(cell[1].intensity == 200);
    for (const auto& smp : cell)
      CHECK(smp.orientation.w() == 1.0f);
  }
  SUBCASE("negative margins are rejected")
  {
    SweepRecording s;
    s.frames.push_back(frame(1, 1, 0.1, {}, 1));
    CHECK_THROWS_AS(reconstruct_volume(s, 0.125, -0.05), std::invalid_argument);
  }
}

TEST_CASE("phantom sweep reconstruction matches a brute-force recomputation")
{
  PhantomScene scene;
  scene.tubes.push_back({Vector3d(0, 3, 2), Vector3d(1, 0, 0), 1.0, 0.4, 150.0, 10.0});
  Posed start, end;
  start.rotation = end.rotation = axis_angle_deg(10.0, Vector3d::UnitX());
  end.translation = Vector3d(0, 0, 4);
  const auto plan = SweepPlan::linear(start, end, 50, ImageSpec{32, 40, Eigen::Vector2d(0.15, 0.1)});
  SweepRecording sweep = simulate_sweep(scene, plan);
  sweep.calibration.translation = Vector3d(0.3, -0.2, 0.1);
  sweep.calibration.rotation = axis_angle_deg(4.0, Vector3d(0, 0, 1));
  Mask mask = Mask::Constant(40, 32, true);
  mask.block(0, 0, 5, 32).setConstant(false);
  sweep.mask = mask;

  const auto v = reconstruct_volume(sweep, 0.125, 0.5);
  CHECK(v.sample_count() == 50 * std::size_t(mask.count()));

  // Brute-force: every unmasked pixel placed with the calibrated pose lands in the voxel holding it.
  std::size_t checked = 0;
  std::vector<std::size_t> expected_counts(v.grid().cell_count(), 0);
  for (const auto& f : sweep.frames) {
    const Posed plane = compose(f.pose, sweep.calibration);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 32; ++c) {
        if (!mask(r, c))
          continue;
        const Vector3d p = plane * Vector3d(c * 0.15, r * 0.1, 0.0);
        const auto cell = v.grid().voxel_of(p.cast<float>().cast<double>());
        REQUIRE(cell);
        ++expected_counts[v.grid().linear(*cell)];
        ++checked;
      }
  }
  CHECK(checked == v.sample_count());
  for (std::size_t i = 0; i < expected_counts.size(); ++i)
    REQUIRE(v.count(i) == expected_counts[i]);

  // Orientation fidelity.
  const Quaternion<double> q = canonicalize(compose(sweep.frames[0].pose, sweep.calibration).rotation);
  for (const auto& s : v.samples())
    CHECK(s.orientation.coeffs() == q.cast<float>().coeffs());
}

TEST_CASE("reconstruction is deterministic")
{
  PhantomScene scene;
  scene.spheres.push_back({Vector3d(2, 2, 1), 1.0, 0.3, 120.0, std::nullopt});
  Posed end;
  end.translation = Vector3d(0, 0, 2);
  const auto sweep = simulate_sweep(scene, SweepPlan::linear({}, end, 20, ImageSpec{32, 32}));
  test::TempDir dir("det");
  save_volume(reconstruct_volume(sweep, 0.125, 0.5), dir / "a.darevol");
  save_volume(reconstruct_volume(sweep, 0.125, 0.5), dir / "b.darevol");
  CHECK(test::read_file(dir / "a.darevol") == test::read_file(dir / "b.darevol"));
}

TEST_CASE("doubling the voxel size halves the dims")
{
  Posed end;
  end.translation = Vector3d(0, 0, 3);
  const auto sweep = simulate_sweep(PhantomScene{}, SweepPlan::linear({}, end, 10, ImageSpec{48, 40}));
  const auto planes = image_plane_frames(sweep);
  const auto fine = sweep_grid(planes, 0.125, 0.5);
  const auto coarse = sweep_grid(planes, 0.25, 0.5);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(coarse.dims[i] - fine.dims[i] / 2.0) <= 1.0);
}

TEST_CASE("validate_sweep rejects broken recordings")
{
  SweepRecording s;
  CHECK_THROWS_AS(validate_sweep(s), std::invalid_argument);
  s.frames.push_back(frame(2, 2, 0.1));
  s.frames.push_back(frame(2, 2, 0.1));
  s.frames[0].timestamp = 1.0;
  CHECK_THROWS_AS(validate_sweep(s), std::invalid_argument);
  s.frames[0].timestamp = 0.0;
  s.frames[1].pixel_pitch.x() = 0.0;
  CHECK_THROWS_AS(validate_sweep(s), std::invalid_argument);
  s.frames[1].pixel_pitch.x() = 0.1;
  s.calibration.rotation.coeffs() *= 2.0;
  CHECK_THROWS_AS(validate_sweep(s), std::invalid_argument);
  s.calibration.rotation.normalize();
  s.mask = Mask::Constant(3, 2, true);
  CHECK_THROWS_AS(validate_sweep(s), std::invalid_argument);
  s.mask.reset();
  CHECK_NOTHROW(validate_sweep(s));
}
