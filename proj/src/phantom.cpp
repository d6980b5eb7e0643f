#include "dare/phantom.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace dare {
namespace {

using nlohmann::json;

Eigen::Vector3d vec3(const json& j, const char* what)
{
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3)
    throw std::runtime_error(std::string(what) + " needs 3 values");
  return {v[0], v[1], v[2]};
}

std::optional<double> optional_number(const json& j, const char* key)
{
  if (!j.contains(key) || j[key].is_null())
    return std::nullopt;
  return j[key].get<double>();
}

std::uint64_t frame_seed(std::uint64_t seed, std::uint64_t index)
{
  return seed * 0x9E3779B97F4A7C15ULL + index * 0xBF58476D1CE4E5B9ULL + 1;
}

// Echo intensity at a world point seen along `beam` (unit), before noise.
double echo(const PhantomScene& scene, const Eigen::Vector3d& w, const Eigen::Vector3d& beam)
{
  double base = scene.background_intensity;
  double walls = 0.0;
  const double p = scene.specular_exponent;
  for (const Tube& t : scene.tubes) {
    const Eigen::Vector3d a = t.axis.normalized();
    const Eigen::Vector3d d = w - t.point;
    const Eigen::Vector3d radial = d - d.dot(a) * a;
    const double r = radial.norm();
    if (std::abs(r - t.radius) <= 0.5 * t.wall_thickness && r > 0.0)
      walls += t.wall_intensity * std::pow(std::abs(beam.dot(radial / r)), p);
    else if (r < t.radius - 0.5 * t.wall_thickness && t.interior_intensity)
      base = *t.interior_intensity;
  }
  for (const Sphere& s : scene.spheres) {
    const Eigen::Vector3d d = w - s.center;
    const double r = d.norm();
    if (std::abs(r - s.radius) <= 0.5 * s.shell_thickness && r > 0.0)
      walls += s.intensity * std::pow(std::abs(beam.dot(d / r)), p);
    else if (r < s.radius - 0.5 * s.shell_thickness && s.interior_intensity)
      base = *s.interior_intensity;
  }
  return base + walls;
}

GrayImage render(const PhantomScene& scene, const Posed& pose, int width, int height, const Eigen::Vector2d& pitch,
                 std::optional<std::uint64_t> noise_seed)
{
  scene.validate();
  require_unit(pose.rotation, "pose rotation");
  const Eigen::Vector3d beam = rotate(pose.rotation, Eigen::Vector3d::UnitY());
  const bool noisy = noise_seed && scene.speckle.amplitude > 0.0;
  std::mt19937_64 rng(noisy ? *noise_seed : 0);
  std::normal_distribution<double> noise(0.0, noisy ? scene.speckle.amplitude : 1.0);

  GrayImage img(height, width);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const Eigen::Vector3d w = pose * Eigen::Vector3d(u * pitch.x(), v * pitch.y(), 0.0);
      double value = echo(scene, w, beam);
      if (noisy)
        value += noise(rng);
      img(v, u) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }
  return img;
}

}  // namespace

void PhantomScene::validate() const
{
  auto check_gray = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 255.0))
      throw std::invalid_argument(std::string(what) + " must lie in [0, 255]");
  };
  check_gray(background_intensity, "background_intensity");
  for (const auto& t : tubes) {
    check_gray(t.wall_intensity, "tube wall_intensity");
    if (t.interior_intensity)
      check_gray(*t.interior_intensity, "tube interior_intensity");
    if (!t.point.allFinite() || !(t.axis.norm() > 0.0) || !(t.radius > 0.0) || !(t.wall_thickness > 0.0))
      throw std::invalid_argument("tube needs finite point, non-zero axis and positive radius/thickness");
  }
  for (const auto& s : spheres) {
    check_gray(s.intensity, "sphere intensity");
    if (s.interior_intensity)
      check_gray(*s.interior_intensity, "sphere interior_intensity");
    if (!s.center.allFinite() || !(s.radius > 0.0) || !(s.shell_thickness > 0.0))
      throw std::invalid_argument("sphere needs finite centre and positive radius/thickness");
  }
  if (!(specular_exponent >= 0.0) || !(speckle.amplitude >= 0.0))
    throw std::invalid_argument("specular exponent and speckle amplitude must be non-negative");
}

SweepPlan SweepPlan::linear(const Posed& start, const Posed& end, int frames, ImageSpec image, double frame_rate)
{
  if (frames < 2)
    throw std::invalid_argument("a sweep plan needs at least 2 frames");
  SweepPlan plan;
  plan.image = image;
  plan.frame_rate = frame_rate;
  for (int i = 0; i < frames; ++i)
    plan.trajectory.push_back(interpolate(start, end, static_cast<double>(i) / (frames - 1)));
  return plan;
}

void SweepPlan::append(const SweepPlan& other)
{
  trajectory.insert(trajectory.end(), other.trajectory.begin(), other.trajectory.end());
}

TrackedFrame render_frame(const PhantomScene& scene, const Posed& pose, const ImageSpec& image,
                          std::optional<std::uint64_t> noise_seed)
{
  TrackedFrame f;
  f.pixels = render(scene, pose, image.width, image.height, image.pixel_pitch, noise_seed);
  f.pixel_pitch = image.pixel_pitch;
  f.pose = pose;
  return f;
}

SweepRecording simulate_sweep(const PhantomScene& scene, const SweepPlan& plan)
{
  if (plan.trajectory.size() < 2)
    throw std::invalid_argument("a sweep plan needs at least 2 frames");
  if (!(plan.frame_rate > 0.0))
    throw std::invalid_argument("frame rate must be positive");
  SweepRecording rec;
  rec.frames.resize(plan.trajectory.size());
  for (std::size_t i = 0; i < plan.trajectory.size(); ++i) {
    rec.frames[i] = render_frame(scene, plan.trajectory[i], plan.image, frame_seed(scene.speckle.seed, i));
    rec.frames[i].timestamp = static_cast<double>(i) / plan.frame_rate;
  }
  return rec;
}

ResliceImage ground_truth_reslice(const PhantomScene& scene, const ReslicePlane& plane,
                                  std::optional<std::uint64_t> noise_seed)
{
  validate_plane(plane);
  ResliceImage out;
  out.pixels = render(scene, plane.pose, plane.width, plane.height, plane.pixel_pitch, noise_seed);
  out.coverage = Mask::Constant(plane.height, plane.width, true);
  return out;
}

OpposingSweepsFixture opposing_sweeps_fixture(double plus_intensity, double minus_intensity, int frames_per_sweep,
                                              int size, double pitch)
{
  PhantomScene plus_scene, minus_scene;
  plus_scene.background_intensity = plus_intensity;
  minus_scene.background_intensity = minus_intensity;
  plus_scene.speckle.amplitude = minus_scene.speckle.amplitude = 0.0;

  const ImageSpec image{size, size, Eigen::Vector2d::Constant(pitch)};
  // 180 degrees about y flips both the lateral axis and the normal; the lateral
  // offset makes pixel u of one sweep coincide with pixel size-1-u of the other.
  const Eigen::Quaterniond flip = axis_angle_deg(180.0, Eigen::Vector3d::UnitY());
  const double lateral = (size - 1) * pitch;

  OpposingSweepsFixture fx;
  fx.plus_intensity = plus_intensity;
  fx.minus_intensity = minus_intensity;
  for (int pass = 0; pass < 2; ++pass)
    for (int k = 0; k < frames_per_sweep; ++k) {
      Posed pose;
      pose.translation = Eigen::Vector3d(0.0, 0.0, k * pitch);
      if (pass == 1) {
        pose.rotation = flip;
        pose.translation.x() = lateral;
      }
      TrackedFrame f = render_frame(pass == 0 ? plus_scene : minus_scene, pose, image);
      f.timestamp = static_cast<double>(pass * frames_per_sweep + k) / 30.0;
      fx.sweep.frames.push_back(std::move(f));
    }

  const int inset = 2;
  const double mid_z = 0.5 * (frames_per_sweep - 1) * pitch + 0.25 * pitch;
  fx.plus_z.width = fx.plus_z.height = size - 2 * inset;
  fx.plus_z.pixel_pitch = Eigen::Vector2d::Constant(pitch);
  fx.plus_z.pose.translation = Eigen::Vector3d(inset * pitch, inset * pitch, mid_z);
  fx.minus_z = fx.plus_z;
  fx.minus_z.pose.rotation = flip;
  fx.minus_z.pose.translation.x() = (size - 1 - inset) * pitch;
  return fx;
}

Posed pose_from_json(const json& j)
{
  Posed p;
  if (j.contains("translation"))
    p.translation = vec3(j.at("translation"), "translation");
  if (j.contains("rotation")) {
    const auto r = j.at("rotation").get<std::vector<double>>();
    if (r.size() != 4)
      throw std::runtime_error("rotation needs 4 values (w x y z)");
    p.rotation = Eigen::Quaterniond(r[0], r[1], r[2], r[3]);
    require_unit(p.rotation, "rotation");
    p.rotation.normalize();
  }
  // Intrinsic rotations applied in list order.
  if (j.contains("axis_angles"))
    for (const auto& aa : j.at("axis_angles"))
      p.rotation = (p.rotation * axis_angle_deg(aa.at("degrees").get<double>(), vec3(aa.at("axis"), "axis"))).normalized();
  return p;
}

PhantomScene scene_from_json(const json& j)
{
  PhantomScene s;
  s.background_intensity = j.value("background", s.background_intensity);
  s.specular_exponent = j.value("specular_exponent", s.specular_exponent);
  if (j.contains("speckle")) {
    s.speckle.amplitude = j["speckle"].value("amplitude", s.speckle.amplitude);
    s.speckle.seed = j["speckle"].value("seed", s.speckle.seed);
  }
  for (const auto& t : j.value("tubes", json::array())) {
    Tube tube;
    tube.point = vec3(t.at("point"), "tube point");
    tube.axis = vec3(t.at("axis"), "tube axis");
    tube.radius = t.at("radius").get<double>();
    tube.wall_thickness = t.value("wall_thickness", tube.wall_thickness);
    tube.wall_intensity = t.value("wall_intensity", tube.wall_intensity);
    tube.interior_intensity = optional_number(t, "interior_intensity");
    s.tubes.push_back(tube);
  }
  for (const auto& sp : j.value("spheres", json::array())) {
    Sphere sphere;
    sphere.center = vec3(sp.at("center"), "sphere center");
    sphere.radius = sp.at("radius").get<double>();
    sphere.shell_thickness = sp.value("shell_thickness", sphere.shell_thickness);
    sphere.intensity = sp.value("intensity", sphere.intensity);
    sphere.interior_intensity = optional_number(sp, "interior_intensity");
    s.spheres.push_back(sphere);
  }
  s.validate();
  return s;
}

namespace {

SweepPlan plan_from_json(const json& j, const ImageSpec& image, double frame_rate)
{
  SweepPlan plan;
  plan.image = image;
  plan.frame_rate = frame_rate;
  const json passes = j.is_array() ? j : json::array({j});
  for (const auto& pass : passes) {
    if (pass.contains("poses")) {
      for (const auto& p : pass["poses"])
        plan.trajectory.push_back(pose_from_json(p));
    } else {
      plan.append(SweepPlan::linear(pose_from_json(pass.at("start")), pose_from_json(pass.at("end")),
                                    pass.at("frames").get<int>(), image, frame_rate));
    }
  }
  if (plan.trajectory.size() < 2)
    throw std::runtime_error("sweep plan needs at least 2 frames");
  return plan;
}

}  // namespace

SceneFile load_scene_file(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open scene file " + path.string());
  try {
    const json j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    SceneFile sf;
    sf.scene = scene_from_json(j.at("scene"));
    const json& img = j.at("image");
    ImageSpec image;
    image.width = img.at("width").get<int>();
    image.height = img.at("height").get<int>();
    const auto pitch = img.at("pitch").get<std::vector<double>>();
    if (pitch.size() != 2 || image.width <= 0 || image.height <= 0)
      throw std::runtime_error("image needs positive width/height and 2 pitch values");
    image.pixel_pitch = Eigen::Vector2d(pitch[0], pitch[1]);
    const double rate = j.value("frame_rate", 30.0);
    sf.reconstruction = plan_from_json(j.at("reconstruction"), image, rate);
    sf.evaluation = plan_from_json(j.at("evaluation"), image, rate);
    sf.voxel_size = j.value("voxel_size", sf.voxel_size);
    sf.margin = j.value("margin", sf.margin);
    sf.ground_truth_noise = j.value("ground_truth_noise", false);
    return sf;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace dare
