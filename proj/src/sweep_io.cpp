#include "dare/sweep_io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dare {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kMetaFile = "meta.json";

// Leaves quaternions that are unit to working precision bit-for-bit unchanged.
void renormalize(Eigen::Quaterniond& q)
{
  if (std::abs(q.squaredNorm() - 1.0) > 1e-12)
    q.normalize();
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in)
{
  std::ifstream in(path, mode);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::vector<double> parse_numbers(const fs::path& file, std::size_t line_no, const std::string& line)
{
  std::vector<double> out;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r'))
      ++p;
    if (p == end)
      break;
    double value;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t' && *next != '\r'))
      throw ParseError(file, line_no, "malformed number near '" + std::string(p, std::min<std::size_t>(16, end - p)) + "'");
    if (!std::isfinite(value))
      throw ParseError(file, line_no, "non-finite value");
    out.push_back(value);
    p = next;
  }
  return out;
}

bool skippable(const std::string& line)
{
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json pose_to_json(const Posed& p)
{
  return {{"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"rotation", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}}};
}

Posed calibration_from_json(const json& j)
{
  const auto t = j.at("translation").get<std::vector<double>>();
  const auto r = j.at("rotation").get<std::vector<double>>();
  if (t.size() != 3 || r.size() != 4)
    throw std::runtime_error("pose needs 3 translation and 4 rotation (w x y z) values");
  Posed p;
  p.translation = Eigen::Vector3d(t[0], t[1], t[2]);
  p.rotation = Eigen::Quaterniond(r[0], r[1], r[2], r[3]);
  require_unit(p.rotation, "calibration rotation");
  renormalize(p.rotation);
  return p;
}

}  // namespace

ParseError::ParseError(const fs::path& file, std::size_t line, const std::string& what)
    : std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + what), file_(file), line_(line)
{
}

std::vector<TimestampedPose> read_pose_stream(const fs::path& path)
{
  auto in = open_in(path);
  std::vector<TimestampedPose> poses;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (skippable(line))
      continue;
    const auto v = parse_numbers(path, line_no, line);
    if (v.size() != 8)
      throw ParseError(path, line_no, "expected 8 values 'timestamp tx ty tz qw qx qy qz', got " + std::to_string(v.size()));
    TimestampedPose p;
    p.timestamp = v[0];
    p.pose.translation = Eigen::Vector3d(v[1], v[2], v[3]);
    p.pose.rotation = Eigen::Quaterniond(v[4], v[5], v[6], v[7]);
    if (!is_unit(p.pose.rotation))
      throw ParseError(path, line_no, "rotation is not a unit quaternion");
    renormalize(p.pose.rotation);
    if (!poses.empty() && p.timestamp < poses.back().timestamp)
      throw ParseError(path, line_no, "timestamps must be non-decreasing");
    poses.push_back(p);
  }
  if (poses.empty())
    throw std::runtime_error(path.string() + ": pose stream is empty");
  return poses;
}

void write_pose_stream(const fs::path& path, const std::vector<TimestampedPose>& poses)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "# timestamp tx ty tz qw qx qy qz\n";
  for (const auto& p : poses) {
    out << format_double(p.timestamp);
    for (double v : {p.pose.translation.x(), p.pose.translation.y(), p.pose.translation.z(), p.pose.rotation.w(),
                     p.pose.rotation.x(), p.pose.rotation.y(), p.pose.rotation.z()})
      out << ' ' << format_double(v);
    out << '\n';
  }
}

std::vector<double> read_timestamps(const fs::path& path)
{
  auto in = open_in(path);
  std::vector<double> ts;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (skippable(line))
      continue;
    const auto v = parse_numbers(path, line_no, line);
    if (v.size() != 1)
      throw ParseError(path, line_no, "expected exactly one timestamp");
    if (!ts.empty() && v[0] < ts.back())
      throw ParseError(path, line_no, "timestamps must be non-decreasing");
    ts.push_back(v[0]);
  }
  return ts;
}

SweepRecording load_sweep(const fs::path& dir, std::size_t* dropped)
{
  const fs::path meta_path = dir / kMetaFile;
  json meta;
  try {
    auto in = open_in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(meta_path.string() + ": " + e.what());
  }

  SweepRecording sweep;
  Eigen::Index width = 0, height = 0;
  Eigen::Vector2d pitch;
  fs::path frames_file, poses_file, stamps_file;
  std::string mask_file;
  try {
    if (meta.value("format", "") != "daresweep")
      throw std::runtime_error("format must be \"daresweep\"");
    if (meta.value("version", 0) != 1)
      throw std::runtime_error("unsupported version");
    width = meta.at("width").get<Eigen::Index>();
    height = meta.at("height").get<Eigen::Index>();
    const auto pp = meta.at("pixel_pitch").get<std::vector<double>>();
    if (pp.size() != 2)
      throw std::runtime_error("pixel_pitch needs two values (lateral, axial)");
    pitch = Eigen::Vector2d(pp[0], pp[1]);
    sweep.calibration = calibration_from_json(meta.at("calibration"));
    frames_file = dir / meta.value("frames", "frames.raw");
    poses_file = dir / meta.value("poses", "poses.txt");
    stamps_file = dir / meta.value("timestamps", "timestamps.txt");
    if (meta.contains("mask") && !meta["mask"].is_null())
      mask_file = meta["mask"].get<std::string>();
  } catch (const std::exception& e) {
    throw std::runtime_error(meta_path.string() + ": " + e.what());
  }
  if (width <= 0 || height <= 0 || !(pitch.array() > 0.0).all())
    throw std::runtime_error(meta_path.string() + ": image dims and pixel pitch must be positive");

  for (const auto& f : {frames_file, poses_file, stamps_file})
    if (!fs::exists(f))
      throw std::runtime_error("missing sweep file: " + f.string());

  const auto stamps = read_timestamps(stamps_file);
  const auto poses = read_pose_stream(poses_file);

  const auto frame_bytes = static_cast<std::uintmax_t>(width * height);
  const auto raw_size = fs::file_size(frames_file);
  if (raw_size != frame_bytes * stamps.size())
    throw std::runtime_error(frames_file.string() + ": size " + std::to_string(raw_size) + " does not match " +
                             std::to_string(stamps.size()) + " frames of " + std::to_string(width) + "x" +
                             std::to_string(height));

  std::vector<TimestampedImage> images(stamps.size());
  auto raw = open_in(frames_file, std::ios::binary);
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    images[i].timestamp = stamps[i];
    images[i].pixels.resize(height, width);
    raw.read(reinterpret_cast<char*>(images[i].pixels.data()), static_cast<std::streamsize>(frame_bytes));
  }

  SyncResult sync = synchronize(images, poses, pitch);
  if (dropped)
    *dropped = sync.dropped;
  sweep.frames = std::move(sync.frames);

  if (!mask_file.empty()) {
    Mask m = read_pbm(dir / mask_file);
    if (m.rows() != height || m.cols() != width)
      throw std::runtime_error((dir / mask_file).string() + ": mask dims do not match frames");
    sweep.mask = std::move(m);
  }
  validate_sweep(sweep);
  return sweep;
}

void save_sweep(const SweepRecording& sweep, const fs::path& dir)
{
  validate_sweep(sweep);
  fs::create_directories(dir);
  const auto& first = sweep.frames.front();

  json meta = {{"format", "daresweep"},
               {"version", 1},
               {"width", first.width()},
               {"height", first.height()},
               {"pixel_pitch", {first.pixel_pitch.x(), first.pixel_pitch.y()}},
               {"frame_count", sweep.frames.size()},
               {"calibration", pose_to_json(sweep.calibration)},
               {"frames", "frames.raw"},
               {"poses", "poses.txt"},
               {"timestamps", "timestamps.txt"},
               {"mask", nullptr}};
  if (sweep.mask) {
    write_pbm(dir / "mask.pbm", *sweep.mask);
    meta["mask"] = "mask.pbm";
  }
  {
    std::ofstream out(dir / kMetaFile);
    out << meta.dump(2) << '\n';
  }

  std::ofstream raw(dir / "frames.raw", std::ios::binary);
  std::ofstream stamps(dir / "timestamps.txt");
  std::vector<TimestampedPose> poses;
  for (const auto& f : sweep.frames) {
    raw.write(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
    stamps << format_double(f.timestamp) << '\n';
    poses.push_back({f.timestamp, f.pose});
  }
  write_pose_stream(dir / "poses.txt", poses);
  if (!raw || !stamps)
    throw std::runtime_error("failed writing sweep to " + dir.string());
}

}  // namespace dare
