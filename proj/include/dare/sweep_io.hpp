#ifndef DARE_SWEEP_IO_HPP
#define DARE_SWEEP_IO_HPP

#include "dare/reconstruct.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dare {

/// Error raised by the text parsers; carries the file and 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::filesystem::path& file, std::size_t line, const std::string& what);
  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

/// Parses `timestamp tx ty tz qw qx qy qz` lines. Blank lines and `#` comments are skipped.
std::vector<TimestampedPose> read_pose_stream(const std::filesystem::path& path);
void write_pose_stream(const std::filesystem::path& path, const std::vector<TimestampedPose>& poses);

/// One floating point timestamp per line.
std::vector<double> read_timestamps(const std::filesystem::path& path);

/// Loads a `.daresweep` directory (meta.json, frames.raw, poses.txt, timestamps.txt,
/// optional mask.pbm) and synchronizes frames against the pose stream. Images outside
/// the pose stream are dropped; the count is returned through `dropped` when given.
SweepRecording load_sweep(const std::filesystem::path& dir, std::size_t* dropped = nullptr);

/// Writes a sweep whose pose stream is sampled exactly at the frame timestamps.
void save_sweep(const SweepRecording& sweep, const std::filesystem::path& dir);

}  // namespace dare

#endif  // DARE_SWEEP_IO_HPP
