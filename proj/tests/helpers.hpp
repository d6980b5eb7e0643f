#ifndef DARE_TESTS_HELPERS_HPP
#define DARE_TESTS_HELPERS_HPP

#include "dare/reslice.hpp"
#include "dare/volume.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace dare::test {

inline std::filesystem::path source_dir() { return DARE_SOURCE_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
  {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dare_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Quaternion<double> random_rotation(std::mt19937_64& rng)
{
  std::normal_distribution<double> n;
  Quaternion<double> q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

/// Rotation within `max_deg` degrees of `base`.
inline Quaternion<double> perturbed(const Quaternion<double>& base, double max_deg, std::mt19937_64& rng)
{
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> a(0.0, max_deg);
  const Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  return (base * axis_angle_deg(a(rng), axis.normalized())).normalized();
}

/// Random directional volume: samples scattered in the grid, orientations clustered
/// around a few directions so that thresholds both accept and reject.
inline DirectionalVolume random_volume(std::mt19937_64& rng, std::size_t n, const GridGeometry& grid,
                                       const std::vector<Quaternion<double>>& directions)
{
  VolumeBuilder b(grid);
  const Eigen::Vector3d extent = grid.voxel_size * grid.dims.cast<double>().matrix();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, directions.size() - 1);
  std::uniform_int_distribution<int> gray(0, 255);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d p;
    do {
      p = grid.origin + Eigen::Vector3d(u(rng) * extent.x(), u(rng) * extent.y(), u(rng) * extent.z());
    } while (!grid.voxel_of(p.cast<float>().cast<double>()));
    b.insert(p, perturbed(directions[pick(rng)], 40.0, rng), static_cast<std::uint8_t>(gray(rng)));
  }
  return std::move(b).seal();
}

/// Random plane through the grid whose normal lies near one of `directions`.
inline ReslicePlane random_plane(std::mt19937_64& rng, const GridGeometry& grid,
                                 const std::vector<Quaternion<double>>& directions, int max_side = 24)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> side(1, max_side);
  std::uniform_int_distribution<std::size_t> pick(0, directions.size() - 1);
  ReslicePlane p;
  p.width = side(rng);
  p.height = side(rng);
  p.pixel_pitch = Eigen::Vector2d(0.05 + 0.15 * u(rng), 0.05 + 0.15 * u(rng));
  const Eigen::Vector3d extent = grid.voxel_size * grid.dims.cast<double>().matrix();
  p.pose.translation = grid.origin + Eigen::Vector3d(u(rng) * extent.x(), u(rng) * extent.y(), u(rng) * extent.z()) -
                       0.3 * extent;
  p.pose.rotation = perturbed(directions[pick(rng)], 30.0, rng);
  return p;
}

inline GridGeometry small_grid(double voxel = 0.125, int n = 16)
{
  GridGeometry g;
  g.origin = Eigen::Vector3d(-0.3, 0.2, -1.1);
  g.voxel_size = voxel;
  g.dims = CellIndex::Constant(n);
  return g;
}

inline std::vector<Quaternion<double>> test_directions()
{
  return {Quaternion<double>::Identity(), axis_angle_deg(180.0, Eigen::Vector3d(0, 1, 0)),
          axis_angle_deg(30.0, Eigen::Vector3d(1, 0, 0)), axis_angle_deg(90.0, Eigen::Vector3d(0, 1, 0))};
}

}  // namespace dare::test

#endif  // DARE_TESTS_HELPERS_HPP
