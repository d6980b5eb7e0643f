// dare: command line front end for reconstruction, reslicing, benchmarking and the reslice service.

#include "dare/baseline.hpp"
#include "dare/bench.hpp"
#include "dare/eval.hpp"
#include "dare/phantom.hpp"
#include "dare/reconstruct.hpp"
#include "dare/reslice.hpp"
#include "dare/service.hpp"
#include "dare/sweep_io.hpp"
#include "dare/volume.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <pthread.h>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace dare;

namespace {

struct ResliceFlags {
  std::vector<double> pose;
  std::vector<int> dims{256, 256};
  std::vector<double> pitch{0.125};
  std::vector<double> thresholds;
  ResliceConfig config;
};

void add_config_flags(CLI::App* cmd, ResliceConfig& cfg, std::vector<double>& thresholds)
{
  cmd->add_option("--radius", cfg.interp_radius, "interpolation radius, mm")->capture_default_str();
  cmd->add_option("--k-normal", cfg.k_normal, "normal-alignment weighting exponent")->capture_default_str();
  cmd->add_option("--k-inplane", cfg.k_inplane, "in-plane weighting exponent")->capture_default_str();
  cmd->add_option("--k-dist", cfg.k_dist, "distance weighting exponent (0 disables)")->capture_default_str();
  cmd->add_option("--thresholds", thresholds, "normal and in-plane thresholds, degrees")->expected(2);
}

void apply_thresholds(ResliceConfig& cfg, const std::vector<double>& t)
{
  if (t.size() == 2) {
    cfg.normal_threshold = t[0];
    cfg.inplane_threshold = t[1];
  }
}

ReslicePlane plane_from_flags(const ResliceFlags& f)
{
  ReslicePlane p;
  p.pose.translation = Eigen::Vector3d(f.pose[0], f.pose[1], f.pose[2]);
  p.pose.rotation = Eigen::Quaterniond(f.pose[3], f.pose[4], f.pose[5], f.pose[6]);
  require_unit(p.pose.rotation, "--pose rotation");
  p.pose.rotation.normalize();
  p.width = f.dims[0];
  p.height = f.dims[1];
  p.pixel_pitch = Eigen::Vector2d(f.pitch[0], f.pitch.size() > 1 ? f.pitch[1] : f.pitch[0]);
  return p;
}

void print_summary(const ComparisonReport& r)
{
  std::printf("pairs: %zu (skipped %zu)\n", r.pairs.size(), r.skipped.size());
  std::printf("  NCC   %-9s median %.4f (IQR %.4f-%.4f)\n", r.label_a.c_str(), r.ncc_a.median, r.ncc_a.q1, r.ncc_a.q3);
  std::printf("  NCC   %-9s median %.4f (IQR %.4f-%.4f)\n", r.label_b.c_str(), r.ncc_b.median, r.ncc_b.q1, r.ncc_b.q3);
  std::printf("  SSIM  %-9s median %.4f (IQR %.4f-%.4f)\n", r.label_a.c_str(), r.ssim_a.median, r.ssim_a.q1, r.ssim_a.q3);
  std::printf("  SSIM  %-9s median %.4f (IQR %.4f-%.4f)\n", r.label_b.c_str(), r.ssim_b.median, r.ssim_b.q1, r.ssim_b.q3);
  auto p = [](const std::optional<WilcoxonResult>& w) { return w ? w->p : 1.0; };
  std::printf("  Wilcoxon p: NCC %.3g, SSIM %.3g\n", p(r.wilcoxon_ncc), p(r.wilcoxon_ssim));
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Directionality-aware ultrasound volume reconstruction and reslicing"};
  app.require_subcommand(1);

  // reconstruct
  fs::path sweep_dir, out_path;
  double voxel_size = 0.125, margin = 0.5;
  auto* rec = app.add_subcommand("reconstruct", "build a .darevol directional volume from a .daresweep");
  rec->add_option("sweep", sweep_dir, "sweep directory")->required();
  rec->add_option("--voxel-size", voxel_size, "voxel edge, mm")->capture_default_str();
  rec->add_option("--margin", margin, "bounding box margin, mm")->capture_default_str();
  rec->add_option("-o,--output", out_path, "output .darevol")->required();

  // compound
  int hole_passes = 3;
  auto* comp = app.add_subcommand("compound", "build a mean-compounded, hole-filled .scalarvol baseline");
  comp->add_option("sweep", sweep_dir, "sweep directory")->required();
  comp->add_option("--voxel-size", voxel_size, "voxel edge, mm")->capture_default_str();
  comp->add_option("--margin", margin, "bounding box margin, mm")->capture_default_str();
  comp->add_option("--hole-passes", hole_passes, "hole filling passes")->capture_default_str();
  comp->add_option("-o,--output", out_path, "output .scalarvol")->required();

  // reslice
  ResliceFlags rf;
  fs::path volume_path, baseline_path;
  auto* rs = app.add_subcommand("reslice", "reslice a volume at a virtual probe pose");
  rs->add_option("volume", volume_path, ".darevol volume")->required();
  rs->add_option("--pose", rf.pose, "tx ty tz qw qx qy qz")->expected(7)->required();
  rs->add_option("--dims", rf.dims, "width height, pixels")->expected(2)->capture_default_str();
  rs->add_option("--pitch", rf.pitch, "pixel pitch, mm (one value or lateral axial)")->expected(1, 2)->capture_default_str();
  rs->add_option("--baseline", baseline_path, ".scalarvol to reslice alongside (written as <out>.baseline.pgm)");
  rs->add_option("-o,--output", out_path, "output .pgm (coverage written to <out>.mask.pbm)")->required();
  add_config_flags(rs, rf.config, rf.thresholds);

  // phantom generate
  fs::path scene_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* ph = app.add_subcommand("phantom", "synthetic phantom tools");
  ph->require_subcommand(1);
  auto* gen = ph->add_subcommand("generate", "render the scene's sweeps and ground-truth images");
  gen->add_option("scene", scene_path, "scene JSON file")->required();
  gen->add_option("-o,--output", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "speckle seed override");

  // bench
  ResliceConfig bench_cfg;
  std::vector<double> bench_thresholds;
  std::size_t max_pairs = 0;
  bool save_images = false;
  auto* bench = app.add_subcommand("bench", "phantom -> DARE and baseline -> similarity report");
  bench->add_option("scene", scene_path, "scene JSON file")->required();
  bench->add_option("-o,--output", out_dir, "report directory")->required();
  bench->add_option("--seed", seed, "speckle seed override");
  bench->add_option("--max-pairs", max_pairs, "limit the number of evaluation poses");
  bench->add_option("--hole-passes", hole_passes, "baseline hole filling passes")->capture_default_str();
  bench->add_flag("--save-images", save_images, "write every reslice and ground truth image");
  add_config_flags(bench, bench_cfg, bench_thresholds);

  // evaluate
  fs::path pairs_path;
  auto* ev = app.add_subcommand("evaluate", "compare two reslice image sets against references");
  ev->add_option("pairs", pairs_path, "pairs manifest JSON")->required();
  ev->add_option("-o,--output", out_dir, "report directory")->required();

  // serve
  std::uint16_t port = default_port();
  std::string host = "127.0.0.1";
  ResliceConfig serve_cfg;
  std::vector<double> serve_thresholds;
  auto* sv = app.add_subcommand("serve", "run the reslice service");
  sv->add_option("volume", volume_path, ".darevol volume")->required();
  sv->add_option("--baseline", baseline_path, ".scalarvol for baseline requests");
  sv->add_option("--port", port, "TCP port (default from DARE_PORT, else 7420)")->capture_default_str();
  sv->add_option("--host", host, "IPv4 address to bind")->capture_default_str();
  add_config_flags(sv, serve_cfg, serve_thresholds);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rec) {
      std::size_t dropped = 0;
      const SweepRecording sweep = load_sweep(sweep_dir, &dropped);
      const DirectionalVolume v = reconstruct_volume(sweep, voxel_size, margin);
      save_volume(v, out_path);
      const auto b = v.grid().bounds();
      std::printf("frames: %zu (dropped %zu outside the pose stream)\n", sweep.frames.size(), dropped);
      std::printf("bounds: (%.4f, %.4f, %.4f) - (%.4f, %.4f, %.4f) mm\n", b.min().x(), b.min().y(), b.min().z(),
                  b.max().x(), b.max().y(), b.max().z());
      std::printf("dims: %d x %d x %d, voxel %.4f mm\n", v.grid().dims.x(), v.grid().dims.y(), v.grid().dims.z(),
                  v.grid().voxel_size);
      std::printf("samples: %zu\n", v.sample_count());
    } else if (*comp) {
      const SweepRecording sweep = load_sweep(sweep_dir);
      const ScalarVolume v = fill_holes(compound(sweep, voxel_size, margin), hole_passes);
      save_scalar_volume(v, out_path);
      std::printf("dims: %d x %d x %d, voxel %.4f mm\n", v.grid.dims.x(), v.grid.dims.y(), v.grid.dims.z(),
                  v.grid.voxel_size);
    } else if (*rs) {
      apply_thresholds(rf.config, rf.thresholds);
      const ReslicePlane plane = plane_from_flags(rf);
      const DirectionalVolume v = load_volume(volume_path);
      const ResliceImage img = reslice(v, plane, rf.config);
      write_reslice(out_path, img);
      const auto covered = img.coverage.count();
      std::printf("latency: %.3f ms, covered pixels: %td / %td\n", img.elapsed_ms, covered, img.coverage.size());
      if (covered == 0)
        std::fprintf(stderr, "warning: plane does not intersect any samples; image is fully unassigned\n");
      if (!baseline_path.empty()) {
        const ScalarVolume sv_vol = load_scalar_volume(baseline_path);
        const ResliceImage bimg = reslice_trilinear(sv_vol, plane);
        write_reslice(fs::path(out_path.string() + ".baseline.pgm"), bimg);
        std::printf("baseline latency: %.3f ms\n", bimg.elapsed_ms);
      }
    } else if (*gen) {
      SceneFile sf = load_scene_file(scene_path);
      if (seed)
        sf.scene.speckle.seed = *seed;
      fs::create_directories(out_dir / "truth");
      save_sweep(simulate_sweep(sf.scene, sf.reconstruction), out_dir / "reconstruction.daresweep");
      save_sweep(simulate_sweep(sf.scene, sf.evaluation), out_dir / "evaluation.daresweep");
      nlohmann::json planes = nlohmann::json::array();
      const auto eval_planes = evaluation_planes(sf);
      for (std::size_t i = 0; i < eval_planes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "truth/eval_%04zu.pgm", i);
        write_reslice(out_dir / name, ground_truth_reslice(sf.scene, eval_planes[i]));
        const auto& p = eval_planes[i];
        planes.push_back({{"id", i},
                          {"image", name},
                          {"pose", {p.pose.translation.x(), p.pose.translation.y(), p.pose.translation.z(),
                                    p.pose.rotation.w(), p.pose.rotation.x(), p.pose.rotation.y(), p.pose.rotation.z()}},
                          {"dims", {p.width, p.height}},
                          {"pitch", {p.pixel_pitch.x(), p.pixel_pitch.y()}}});
      }
      std::ofstream(out_dir / "planes.json") << planes.dump(2) << '\n';
      std::printf("wrote %zu reconstruction frames, %zu evaluation frames to %s\n", sf.reconstruction.trajectory.size(),
                  sf.evaluation.trajectory.size(), out_dir.c_str());
    } else if (*bench) {
      apply_thresholds(bench_cfg, bench_thresholds);
      BenchOptions opt;
      opt.config = bench_cfg;
      opt.seed = seed;
      opt.max_pairs = max_pairs;
      opt.hole_fill_passes = hole_passes;
      if (save_images)
        opt.image_dir = out_dir / "images";
      const BenchResult r = run_benchmark(load_scene_file(scene_path), opt);
      write_report(r.report, out_dir);
      std::printf("volume: %zu samples, reconstruction %.0f ms, baseline %.0f ms\n", r.volume->sample_count(),
                  r.reconstruct_ms, r.compound_ms);
      print_summary(r.report);
      std::printf("median reslice latency: DARE %.2f ms, baseline %.2f ms\n", r.report.latency_a.median,
                  r.report.latency_b.median);
    } else if (*ev) {
      std::ifstream in(pairs_path);
      if (!in)
        throw std::runtime_error("cannot open " + pairs_path.string());
      const auto j = nlohmann::json::parse(in);
      const fs::path base = pairs_path.parent_path();
      std::vector<ResliceImage> a, b, gt;
      std::vector<std::string> ids;
      for (const auto& p : j.at("pairs")) {
        ids.push_back(p.at("id").is_string() ? p["id"].get<std::string>() : p["id"].dump());
        a.push_back(read_reslice(base / p.at("a").get<std::string>()));
        b.push_back(read_reslice(base / p.at("b").get<std::string>()));
        gt.push_back(read_reslice(base / p.at("reference").get<std::string>()));
      }
      if (ids.empty()) {
        std::fprintf(stderr, "error: %s lists no pairs\n", pairs_path.c_str());
        return 2;
      }
      ComparisonReport r = run_comparison(a, b, gt, ids);
      if (j.contains("labels") && j["labels"].size() == 2) {
        r.label_a = j["labels"][0].get<std::string>();
        r.label_b = j["labels"][1].get<std::string>();
      }
      write_report(r, out_dir);
      print_summary(r);
    } else if (*sv) {
      apply_thresholds(serve_cfg, serve_thresholds);
      auto volume = std::make_shared<const DirectionalVolume>(load_volume(volume_path));
      std::shared_ptr<const ScalarVolume> base;
      if (!baseline_path.empty())
        base = std::make_shared<const ScalarVolume>(load_scalar_volume(baseline_path));
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGINT);
      sigaddset(&stop_signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
      ResliceService service(volume, base, serve_cfg);
      const auto bound = service.start(port, host);
      std::printf("serving %s (%zu samples) on %s:%u\n", volume_path.c_str(), volume->sample_count(), host.c_str(),
                  static_cast<unsigned>(bound));
      std::fflush(stdout);
      int sig = 0;
      sigwait(&stop_signals, &sig);
      service.stop();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
