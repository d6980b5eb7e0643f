#ifndef DARE_PROTOCOL_HPP
#define DARE_PROTOCOL_HPP

#include "dare/image.hpp"
#include "dare/reslice.hpp"
#include "dare/volume.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

/// Length-prefixed binary reslice protocol. Every frame is
///   u32 length | u8 version | u8 type | payload
/// with `length` counting the bytes after itself. All integers and floats are
/// little-endian. Field layouts are listed in README.md.
namespace dare::protocol {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

enum class MessageType : std::uint8_t {
  HelloRequest = 0x01,
  ResliceRequest = 0x02,
  HelloResponse = 0x81,
  ResliceResponse = 0x82,
};

enum class Method : std::uint8_t { Dare = 0, Baseline = 1 };
enum class Encoding : std::uint8_t { Raw8 = 0, Deflate = 1 };
enum class Status : std::uint8_t { Ok = 0, Superseded = 1, Error = 2 };

/// Bits of ResliceRequest::override_mask.
enum OverrideBit : std::uint8_t {
  kRadius = 1 << 0,
  kNormalThreshold = 1 << 1,
  kInplaneThreshold = 1 << 2,
  kNormalK = 1 << 3,
  kInplaneK = 1 << 4,
  kDistK = 1 << 5,
};

struct HelloRequest {};

struct HelloResponse {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 0.0;
  std::array<std::uint32_t, 3> dims{};
  std::uint64_t sample_count = 0;
  bool has_baseline = false;
};

struct ResliceRequest {
  std::uint64_t id = 0;
  ReslicePlane plane;
  Method method = Method::Dare;
  Encoding encoding = Encoding::Raw8;
  std::uint8_t override_mask = 0;
  // radius, normal threshold, in-plane threshold, k_normal, k_inplane, k_dist
  std::array<double, 6> overrides{};
};

struct ResliceResponse {
  std::uint64_t id = 0;
  Status status = Status::Ok;
  // Ok
  std::uint32_t width = 0, height = 0;
  double latency_ms = 0.0;
  Encoding encoding = Encoding::Raw8;
  std::vector<std::uint8_t> pixels;    // decoded row-major gray levels
  std::vector<std::uint8_t> coverage;  // packed row-major bits, LSB first
  // Superseded
  std::uint64_t superseded_by = 0;
  // Error
  std::string error;
};

using Message = std::variant<HelloRequest, HelloResponse, ResliceRequest, ResliceResponse>;

/// Malformed bytes: bad version, unknown type, truncated or oversized payload.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full frame including the u32 length prefix.
std::vector<std::uint8_t> encode(const Message& m);

/// Decodes one frame body (the bytes after the length prefix).
Message decode_body(std::span<const std::uint8_t> body);

/// Decodes a complete frame including its length prefix.
Message decode(std::span<const std::uint8_t> frame);

/// Applies the request's override bits to `base`, clamping radius to 8 voxels,
/// thresholds to (0, 90) and exponents to >= 0.
ResliceConfig effective_config(const ResliceRequest& req, const ResliceConfig& base, double voxel_size);

/// Validation failure naming the offending field; nullopt when the request is valid.
std::optional<std::string> validate_request(const ResliceRequest& req);

std::vector<std::uint8_t> pack_bits(const Mask& m);
Mask unpack_bits(std::span<const std::uint8_t> bits, std::uint32_t width, std::uint32_t height);

ResliceResponse make_response(std::uint64_t id, const ResliceImage& img, Encoding encoding);
ResliceImage to_image(const ResliceResponse& r);

}  // namespace dare::protocol

#endif  // DARE_PROTOCOL_HPP
