#include "dare/bench.hpp"

#include <chrono>
#include <cstdio>

namespace dare {
namespace {

double ms_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<ReslicePlane> evaluation_planes(const SceneFile& scene)
{
  std::vector<ReslicePlane> planes;
  for (const Posed& pose : scene.evaluation.trajectory) {
    ReslicePlane p;
    p.pose = pose;
    p.width = scene.evaluation.image.width;
    p.height = scene.evaluation.image.height;
    p.pixel_pitch = scene.evaluation.image.pixel_pitch;
    planes.push_back(p);
  }
  return planes;
}

BenchResult run_benchmark(SceneFile scene, const BenchOptions& options)
{
  if (options.seed)
    scene.scene.speckle.seed = *options.seed;

  BenchResult out;
  const SweepRecording sweep = simulate_sweep(scene.scene, scene.reconstruction);

  auto t0 = std::chrono::steady_clock::now();
  out.volume = std::make_shared<const DirectionalVolume>(reconstruct_volume(sweep, scene.voxel_size, scene.margin));
  out.reconstruct_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  out.baseline = std::make_shared<const ScalarVolume>(
      fill_holes(compound(sweep, scene.voxel_size, scene.margin), options.hole_fill_passes));
  out.compound_ms = ms_since(t0);

  out.planes = evaluation_planes(scene);
  if (options.max_pairs > 0 && out.planes.size() > options.max_pairs)
    out.planes.resize(options.max_pairs);

  std::vector<ResliceImage> dare_images, baseline_images, truths;
  std::vector<std::string> ids;
  // Ground truth speckle uses a seed stream disjoint from the sweep's frames.
  const std::uint64_t gt_seed = scene.scene.speckle.seed ^ 0xA5A5A5A5A5A5A5A5ULL;
  for (std::size_t i = 0; i < out.planes.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "eval_%04zu", i);
    ids.emplace_back(id);
    dare_images.push_back(reslice(*out.volume, out.planes[i], options.config));
    baseline_images.push_back(reslice_trilinear(*out.baseline, out.planes[i]));
    truths.push_back(ground_truth_reslice(scene.scene, out.planes[i],
                                          scene.ground_truth_noise ? std::optional(gt_seed + i) : std::nullopt));
    if (options.image_dir) {
      std::filesystem::create_directories(*options.image_dir);
      write_reslice(*options.image_dir / (ids.back() + "_dare.pgm"), dare_images.back());
      write_reslice(*options.image_dir / (ids.back() + "_baseline.pgm"), baseline_images.back());
      write_reslice(*options.image_dir / (ids.back() + "_truth.pgm"), truths.back());
    }
  }
  out.report = run_comparison(dare_images, baseline_images, truths, ids);
  return out;
}

}  // namespace dare
