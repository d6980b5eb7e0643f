#ifndef DARE_PHANTOM_HPP
#define DARE_PHANTOM_HPP

#include "dare/reconstruct.hpp"
#include "dare/reslice.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace dare {

/// Infinite cylinder whose wall echo depends on the beam/wall angle.
struct Tube {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  double radius = 1.0;
  double wall_thickness = 0.5;
  double wall_intensity = 150.0;
  std::optional<double> interior_intensity;
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  double shell_thickness = 0.5;
  double intensity = 150.0;
  std::optional<double> interior_intensity;
};

struct Speckle {
  double amplitude = 5.0;  // standard deviation in gray levels; 0 disables
  std::uint64_t seed = 1;
};

/// Synthetic scene with a |cos(theta)|^p specular wall model.
struct PhantomScene {
  double background_intensity = 40.0;
  std::vector<Tube> tubes;
  std::vector<Sphere> spheres;
  double specular_exponent = 4.0;
  Speckle speckle;

  void validate() const;
};

struct ImageSpec {
  int width = 64;
  int height = 64;
  Eigen::Vector2d pixel_pitch = Eigen::Vector2d::Constant(0.125);
};

struct SweepPlan {
  std::vector<Posed> trajectory;
  ImageSpec image;
  double frame_rate = 30.0;

  /// frames poses from start to end: linear translation, slerp rotation.
  static SweepPlan linear(const Posed& start, const Posed& end, int frames, ImageSpec image, double frame_rate = 30.0);
  void append(const SweepPlan& other);
};

/// Noise-free when noise_seed is empty or the scene's speckle amplitude is 0.
TrackedFrame render_frame(const PhantomScene& scene, const Posed& pose, const ImageSpec& image,
                          std::optional<std::uint64_t> noise_seed = std::nullopt);

/// Renders every pose; timestamps are i / frame_rate and the calibration is identity.
SweepRecording simulate_sweep(const PhantomScene& scene, const SweepPlan& plan);

/// The analytic scene rendered directly on the reslice plane (every pixel covered).
ResliceImage ground_truth_reslice(const PhantomScene& scene, const ReslicePlane& plane,
                                  std::optional<std::uint64_t> noise_seed = std::nullopt);

/// Two coincident sweeps of the same slab, one facing +z and one facing -z, whose
/// frames read constant `plus_intensity` and `minus_intensity` respectively.
struct OpposingSweepsFixture {
  SweepRecording sweep;
  ReslicePlane plus_z;   // facing +z, expected plus_intensity
  ReslicePlane minus_z;  // facing -z over the same pixels, expected minus_intensity
  double plus_intensity;
  double minus_intensity;
};
OpposingSweepsFixture opposing_sweeps_fixture(double plus_intensity = 50.0, double minus_intensity = 200.0,
                                              int frames_per_sweep = 16, int size = 24, double pitch = 0.125);

/// Scene file: scene primitives plus the reconstruction and evaluation sweep plans.
struct SceneFile {
  PhantomScene scene;
  SweepPlan reconstruction;
  SweepPlan evaluation;
  double voxel_size = 0.125;
  double margin = 0.5;
  bool ground_truth_noise = false;
};

Posed pose_from_json(const nlohmann::json& j);
PhantomScene scene_from_json(const nlohmann::json& j);
SceneFile load_scene_file(const std::filesystem::path& path);

}  // namespace dare

#endif  // DARE_PHANTOM_HPP
