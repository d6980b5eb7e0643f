#include "dare/volume.hpp"

#include "binary_io.hpp"

#include <array>
#include <fstream>
#include <string>

namespace dare {
namespace {

constexpr std::array<char, 4> kVolumeMagic{'D', 'A', 'R', 'E'};
constexpr std::uint32_t kVolumeVersion = 1;

// Slack in voxel units when mapping a cube to cells, so that rounding in the
// cube predicate can never admit a sample from a cell that was not visited.
constexpr double kCellSlack = 1e-6;

}  // namespace

GridGeometry grid_for_bounds(const BoundingBox& box, double voxel_size)
{
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size))
    throw std::invalid_argument("voxel size must be positive");
  if (box.isEmpty())
    throw std::invalid_argument("bounding box is empty");
  GridGeometry g;
  g.origin = box.min();
  g.voxel_size = voxel_size;
  const Eigen::Array3d cells = (box.sizes() / voxel_size).array().floor() + 1.0;
  if ((cells > 2.0e9).any())
    throw std::invalid_argument("volume dimensions overflow");
  g.dims = cells.cast<int>();
  return g;
}

CellRange cells_in_cube(const GridGeometry& grid, const Eigen::Vector3d& p, double radius)
{
  const Eigen::Array3d lo_f = ((p.array() - radius - grid.origin.array()) / grid.voxel_size - kCellSlack).floor();
  const Eigen::Array3d hi_f = ((p.array() + radius - grid.origin.array()) / grid.voxel_size + kCellSlack).floor();
  CellRange r;
  if (!lo_f.allFinite() || !hi_f.allFinite() || (hi_f < 0).any() || (lo_f >= grid.dims.cast<double>()).any()) {
    r.lo = CellIndex::Zero();
    r.hi = CellIndex::Constant(-1);
    return r;
  }
  r.lo = lo_f.max(0.0).cast<int>();
  r.hi = hi_f.min((grid.dims - 1).cast<double>()).cast<int>();
  return r;
}

DirectionalVolume::DirectionalVolume(GridGeometry grid, std::vector<std::uint64_t> offsets,
                                     std::vector<DirectionalSample> samples)
    : grid_(std::move(grid)), offsets_(std::move(offsets)), samples_(std::move(samples))
{
  if (offsets_.size() != grid_.cell_count() + 1 || offsets_.front() != 0 || offsets_.back() != samples_.size())
    throw std::invalid_argument("cell offset table does not match the sample store");
  for (std::size_t i = 0; i + 1 < offsets_.size(); ++i)
    if (offsets_[i] > offsets_[i + 1])
      throw std::invalid_argument("cell offset table is not monotone");
}

std::vector<DirectionalSample> DirectionalVolume::gather_neighborhood(const Eigen::Vector3d& p, double radius) const
{
  if (!(radius > 0.0))
    throw std::invalid_argument("neighbourhood radius must be positive");
  std::vector<DirectionalSample> out;
  for_each_in_cube(p, radius, [&](const DirectionalSample& s) { out.push_back(s); });
  return out;
}

VolumeBuilder::VolumeBuilder(GridGeometry grid) : grid_(std::move(grid))
{
  if (!(grid_.voxel_size > 0.0) || (grid_.dims <= 0).any())
    throw std::invalid_argument("volume grid must have positive voxel size and dimensions");
}

void VolumeBuilder::reserve(std::size_t n)
{
  staged_.reserve(n);
  staged_cell_.reserve(n);
}

void VolumeBuilder::insert(const DirectionalSample& s)
{
  const auto cell = grid_.voxel_of(s.position.cast<double>());
  if (!cell)
    throw OutOfBounds("sample position lies outside the volume");
  DirectionalSample stored = s;
  stored.orientation = canonicalize(Quaternion<float>(s.orientation));
  staged_.push_back(stored);
  staged_cell_.push_back(grid_.linear(*cell));
}

void VolumeBuilder::insert(const Eigen::Vector3d& position, const Quaternion<double>& orientation,
                           std::uint8_t intensity)
{
  DirectionalSample s;
  s.position = position.cast<float>();
  s.orientation = canonicalize(orientation).cast<float>();
  s.intensity = intensity;
  insert(s);
}

DirectionalVolume VolumeBuilder::seal() &&
{
  const std::size_t cells = grid_.cell_count();
  std::vector<std::uint64_t> offsets(cells + 1, 0);
  for (const std::uint64_t c : staged_cell_)
    ++offsets[c + 1];
  for (std::size_t i = 0; i < cells; ++i)
    offsets[i + 1] += offsets[i];

  std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
  std::vector<DirectionalSample> samples(staged_.size());
  for (std::size_t i = 0; i < staged_.size(); ++i)
    samples[cursor[staged_cell_[i]]++] = staged_[i];

  staged_.clear();
  staged_.shrink_to_fit();
  staged_cell_.clear();
  staged_cell_.shrink_to_fit();
  return DirectionalVolume(grid_, std::move(offsets), std::move(samples));
}

void save_volume(const DirectionalVolume& v, const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  const GridGeometry& g = v.grid();
  out.write(kVolumeMagic.data(), kVolumeMagic.size());
  detail::put<std::uint32_t>(out, kVolumeVersion);
  for (int i = 0; i < 3; ++i)
    detail::put<double>(out, g.origin[i]);
  detail::put<double>(out, g.voxel_size);
  for (int i = 0; i < 3; ++i)
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dims[i]));
  detail::put<std::uint64_t>(out, v.sample_count());

  const std::size_t cells = g.cell_count();
  std::vector<std::uint64_t> offsets(cells);
  std::vector<std::uint32_t> counts(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    offsets[i] = v.offset(i);
    counts[i] = v.count(i);
  }
  detail::put_span<std::uint64_t>(out, offsets);
  detail::put_span<std::uint32_t>(out, counts);

  // Serialize field by field so the padding bytes are always zero.
  for (const DirectionalSample& s : v.samples()) {
    for (int i = 0; i < 3; ++i)
      detail::put<float>(out, s.position[i]);
    detail::put<float>(out, s.orientation.w());
    detail::put<float>(out, s.orientation.x());
    detail::put<float>(out, s.orientation.y());
    detail::put<float>(out, s.orientation.z());
    detail::put<std::uint8_t>(out, s.intensity);
    const char pad[3] = {0, 0, 0};
    out.write(pad, 3);
  }
  if (!out)
    throw std::runtime_error("write to " + path.string() + " failed");
}

DirectionalVolume load_volume(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kVolumeMagic)
    throw std::runtime_error(path.string() + ": not a .darevol file");
  const auto version = detail::get<std::uint32_t>(in, "version");
  if (version != kVolumeVersion)
    throw std::runtime_error(path.string() + ": unsupported .darevol version " + std::to_string(version));

  GridGeometry g;
  for (int i = 0; i < 3; ++i)
    g.origin[i] = detail::get<double>(in, "origin");
  g.voxel_size = detail::get<double>(in, "voxel_size");
  for (int i = 0; i < 3; ++i)
    g.dims[i] = static_cast<int>(detail::get<std::uint32_t>(in, "dims"));
  const auto n = detail::get<std::uint64_t>(in, "sample count");

  const std::size_t cells = g.cell_count();
  std::vector<std::uint64_t> offsets(cells + 1);
  std::vector<std::uint32_t> counts(cells);
  detail::get_span<std::uint64_t>(in, std::span(offsets).first(cells), "cell offsets");
  detail::get_span<std::uint32_t>(in, counts, "cell counts");
  offsets[cells] = n;
  for (std::size_t i = 0; i < cells; ++i)
    if (offsets[i] + counts[i] != offsets[i + 1])
      throw std::runtime_error(path.string() + ": inconsistent cell table at cell " + std::to_string(i));

  std::vector<DirectionalSample> samples(n);
  for (auto& s : samples) {
    std::array<float, 7> f;
    detail::get_span<float>(in, f, "sample");
    s.position = Eigen::Vector3f(f[0], f[1], f[2]);
    s.orientation = Eigen::Quaternionf(f[3], f[4], f[5], f[6]);
    s.intensity = detail::get<std::uint8_t>(in, "sample");
    std::array<char, 3> pad;
    detail::get_span<char>(in, pad, "sample");
  }
  return DirectionalVolume(g, std::move(offsets), std::move(samples));
}

}  // namespace dare
