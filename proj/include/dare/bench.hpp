#ifndef DARE_BENCH_HPP
#define DARE_BENCH_HPP

#include "dare/baseline.hpp"
#include "dare/eval.hpp"
#include "dare/phantom.hpp"
#include "dare/reslice.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace dare {

struct BenchOptions {
  ResliceConfig config;
  int hole_fill_passes = 3;
  std::optional<std::uint64_t> seed;        // overrides the scene's speckle seed
  std::size_t max_pairs = 0;                // 0: every evaluation pose
  std::optional<std::filesystem::path> image_dir;  // writes every reslice when set
};

struct BenchResult {
  ComparisonReport report;
  std::shared_ptr<const DirectionalVolume> volume;
  std::shared_ptr<const ScalarVolume> baseline;
  std::vector<ReslicePlane> planes;
  double reconstruct_ms = 0.0;
  double compound_ms = 0.0;
};

/// Evaluation reslice planes: the evaluation sweep's poses with the scene image geometry.
std::vector<ReslicePlane> evaluation_planes(const SceneFile& scene);

/// Simulates the reconstruction sweep, builds the DARE and baseline volumes, reslices
/// both at every evaluation pose and compares them against the analytic ground truth.
BenchResult run_benchmark(SceneFile scene, const BenchOptions& options = {});

}  // namespace dare

#endif  // DARE_BENCH_HPP
