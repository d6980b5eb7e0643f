#include "dare/baseline.hpp"

#include "binary_io.hpp"
#include "dare/parallel.hpp"

#include <array>
#include <chrono>
#include <fstream>

namespace dare {
namespace {

constexpr std::array<char, 4> kScalarMagic{'D', 'A', 'R', 'S'};
constexpr std::uint32_t kScalarVersion = 1;

}  // namespace

ScalarVolume::ScalarVolume(GridGeometry g)
    : grid(std::move(g)),
      accum(grid.cell_count(), 0.0),
      count(grid.cell_count(), 0),
      value(grid.cell_count(), 0.0f),
      state(grid.cell_count(), VoxelState::Empty)
{
}

bool ScalarVolume::add(const Eigen::Vector3d& p, double intensity)
{
  const auto c = grid.voxel_of(p);
  if (!c)
    return false;
  const std::size_t i = grid.linear(*c);
  accum[i] += intensity;
  ++count[i];
  return true;
}

void ScalarVolume::seal()
{
  for (std::size_t i = 0; i < accum.size(); ++i)
    if (count[i] > 0) {
      value[i] = static_cast<float>(accum[i] / count[i]);
      state[i] = VoxelState::Observed;
    }
}

ScalarVolume compound(const SweepRecording& sweep, double voxel_size, double margin)
{
  validate_sweep(sweep);
  const std::vector<TrackedFrame> planes = image_plane_frames(sweep);
  ScalarVolume vol(sweep_grid(planes, voxel_size, margin));
  for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
    const GrayImage& px = sweep.frames[i].pixels;
    for (Eigen::Index v = 0; v < px.rows(); ++v)
      for (Eigen::Index u = 0; u < px.cols(); ++u) {
        if (sweep.mask && !(*sweep.mask)(v, u))
          continue;
        // Positions are rounded through float exactly as in the directional volume.
        const Eigen::Vector3d p = planes[i].pixel_to_world_unchecked(double(u), double(v)).cast<float>().cast<double>();
        if (!vol.add(p, px(v, u)))
          throw OutOfBounds("compounded pixel outside the sweep grid");
      }
  }
  vol.seal();
  return vol;
}

ScalarVolume fill_holes(ScalarVolume v, int max_passes)
{
  const CellIndex dims = v.grid.dims;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<std::pair<std::size_t, float>> updates;
    for (int z = 0; z < dims.z(); ++z)
      for (int y = 0; y < dims.y(); ++y)
        for (int x = 0; x < dims.x(); ++x) {
          const std::size_t i = v.grid.linear(CellIndex(x, y, z));
          if (v.state[i] != VoxelState::Empty)
            continue;
          double sum = 0.0;
          int n = 0;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0)
                  continue;
                if (const auto val = v.at(CellIndex(x + dx, y + dy, z + dz))) {
                  sum += *val;
                  ++n;
                }
              }
          if (n > 0)
            updates.emplace_back(i, static_cast<float>(sum / n));
        }
    if (updates.empty())
      break;
    for (const auto& [i, val] : updates) {
      v.value[i] = val;
      v.state[i] = VoxelState::Filled;
    }
  }
  return v;
}

std::optional<double> sample_trilinear(const ScalarVolume& v, const Eigen::Vector3d& p)
{
  // Continuous coordinate in units of voxels relative to voxel centres.
  const Eigen::Array3d c = (p - v.grid.origin).array() / v.grid.voxel_size - 0.5;
  if (!c.allFinite())
    return std::nullopt;
  const Eigen::Array3d base = c.floor();
  const Eigen::Array3d f = c - base;
  const CellIndex i0 = base.cast<int>();
  double sum = 0.0, wsum = 0.0;
  bool any = false;
  for (int corner = 0; corner < 8; ++corner) {
    const CellIndex off((corner & 1), (corner >> 1) & 1, (corner >> 2) & 1);
    const auto val = v.at(i0 + off);
    if (!val)
      continue;
    any = true;
    const Eigen::Array3d t = (off == 1).select(f, 1.0 - f);
    const double w = t.prod();
    sum += w * *val;
    wsum += w;
  }
  if (!any || wsum <= 1e-12)
    return std::nullopt;
  return sum / wsum;
}

ResliceImage reslice_trilinear(const ScalarVolume& v, const ReslicePlane& plane)
{
  const auto start = std::chrono::steady_clock::now();
  validate_plane(plane);
  ResliceImage out;
  out.pixels.resize(plane.height, plane.width);
  out.coverage.resize(plane.height, plane.width);
  parallel_for(plane.height, [&](int row) {
    for (int u = 0; u < plane.width; ++u) {
      const auto val = sample_trilinear(v, plane.pixel_to_world(u, row));
      out.coverage(row, u) = val.has_value();
      out.pixels(row, u) = val ? static_cast<std::uint8_t>(std::clamp(std::lround(*val), 0L, 255L)) : 0;
    }
  });
  out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void save_scalar_volume(const ScalarVolume& v, const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kScalarMagic.data(), kScalarMagic.size());
  detail::put<std::uint32_t>(out, kScalarVersion);
  for (int i = 0; i < 3; ++i)
    detail::put<double>(out, v.grid.origin[i]);
  detail::put<double>(out, v.grid.voxel_size);
  for (int i = 0; i < 3; ++i)
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(v.grid.dims[i]));
  std::uint64_t observed = 0;
  for (auto s : v.state)
    observed += s == VoxelState::Observed;
  detail::put<std::uint64_t>(out, observed);
  detail::put_span<float>(out, v.value);
  detail::put_span<VoxelState>(out, v.state);
  if (!out)
    throw std::runtime_error("write to " + path.string() + " failed");
}

ScalarVolume load_scalar_volume(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kScalarMagic)
    throw std::runtime_error(path.string() + ": not a .scalarvol file");
  if (detail::get<std::uint32_t>(in, "version") != kScalarVersion)
    throw std::runtime_error(path.string() + ": unsupported .scalarvol version");
  GridGeometry g;
  for (int i = 0; i < 3; ++i)
    g.origin[i] = detail::get<double>(in, "origin");
  g.voxel_size = detail::get<double>(in, "voxel_size");
  for (int i = 0; i < 3; ++i)
    g.dims[i] = static_cast<int>(detail::get<std::uint32_t>(in, "dims"));
  detail::get<std::uint64_t>(in, "observed count");
  ScalarVolume v(g);
  detail::get_span<float>(in, v.value, "values");
  detail::get_span<VoxelState>(in, v.state, "states");
  for (auto s : v.state)
    if (static_cast<std::uint8_t>(s) > 2)
      throw std::runtime_error(path.string() + ": invalid voxel state");
  // Accumulators are not persisted; observed voxels carry their mean as a single sample.
  for (std::size_t i = 0; i < v.state.size(); ++i)
    if (v.state[i] == VoxelState::Observed) {
      v.accum[i] = v.value[i];
      v.count[i] = 1;
    }
  return v;
}

}  // namespace dare
