#include "dare/protocol.hpp"

#include "binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>

namespace dare::protocol {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::uint32_t kMaxImageSide = 4096;

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> raw)
{
  uLongf size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(size);
  if (compress2(out.data(), &size, raw.data(), static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK)
    throw std::runtime_error("deflate failed");
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> packed, std::size_t expected)
{
  std::vector<std::uint8_t> out(expected);
  uLongf size = static_cast<uLongf>(expected);
  if (uncompress(out.data(), &size, packed.data(), static_cast<uLong>(packed.size())) != Z_OK || size != expected)
    throw DecodeError("deflate payload does not decode to width*height bytes");
  return out;
}

void put_header(ByteWriter& w, MessageType type)
{
  w.put<std::uint32_t>(0);  // patched once the payload is known
  w.put<std::uint8_t>(kVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(type));
}

void encode_payload(ByteWriter& w, const HelloRequest&) { put_header(w, MessageType::HelloRequest); }

void encode_payload(ByteWriter& w, const HelloResponse& m)
{
  put_header(w, MessageType::HelloResponse);
  for (int i = 0; i < 3; ++i)
    w.put<double>(m.origin[i]);
  w.put<double>(m.voxel_size);
  for (auto d : m.dims)
    w.put<std::uint32_t>(d);
  w.put<std::uint64_t>(m.sample_count);
  w.put<std::uint8_t>(m.has_baseline ? 1 : 0);
}

void encode_payload(ByteWriter& w, const ResliceRequest& m)
{
  put_header(w, MessageType::ResliceRequest);
  w.put<std::uint64_t>(m.id);
  const auto& p = m.plane.pose;
  for (int i = 0; i < 3; ++i)
    w.put<double>(p.translation[i]);
  for (double q : {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()})
    w.put<double>(q);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.plane.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.plane.height));
  w.put<double>(m.plane.pixel_pitch.x());
  w.put<double>(m.plane.pixel_pitch.y());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.method));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.encoding));
  w.put<std::uint8_t>(m.override_mask);
  for (double v : m.overrides)
    w.put<double>(v);
}

void encode_payload(ByteWriter& w, const ResliceResponse& m)
{
  put_header(w, MessageType::ResliceResponse);
  w.put<std::uint64_t>(m.id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.status));
  switch (m.status) {
    case Status::Ok: {
      if (m.pixels.size() != std::size_t(m.width) * m.height)
        throw std::invalid_argument("response pixel count does not match its dimensions");
      w.put<std::uint32_t>(m.width);
      w.put<std::uint32_t>(m.height);
      w.put<double>(m.latency_ms);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(m.encoding));
      const std::vector<std::uint8_t> payload = m.encoding == Encoding::Deflate ? deflate_bytes(m.pixels) : m.pixels;
      w.put<std::uint32_t>(static_cast<std::uint32_t>(payload.size()));
      w.put_bytes(payload);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(m.coverage.size()));
      w.put_bytes(m.coverage);
      break;
    }
    case Status::Superseded:
      w.put<std::uint64_t>(m.superseded_by);
      break;
    case Status::Error: {
      const std::size_t n = std::min<std::size_t>(m.error.size(), 0xFFFF);
      w.put<std::uint16_t>(static_cast<std::uint16_t>(n));
      w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(m.error.data()), n));
      break;
    }
  }
}

template <typename E>
E get_enum(ByteReader& r, std::uint8_t max, const char* what)
{
  const auto v = r.get<std::uint8_t>(what);
  if (v > max)
    throw DecodeError(std::string("invalid value for ") + what);
  return static_cast<E>(v);
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& m)
{
  ByteWriter w;
  std::visit([&](const auto& msg) { encode_payload(w, msg); }, m);
  auto& bytes = w.bytes();
  const auto len = static_cast<std::uint32_t>(bytes.size() - sizeof(std::uint32_t));
  std::memcpy(bytes.data(), &len, sizeof len);
  return std::move(bytes);
}

Message decode_body(std::span<const std::uint8_t> body)
{
  try {
    ByteReader r(body);
    const auto version = r.get<std::uint8_t>("version");
    if (version != kVersion)
      throw DecodeError("unsupported protocol version " + std::to_string(version) + " (server speaks " +
                        std::to_string(kVersion) + ")");
    const auto type = r.get<std::uint8_t>("type");
    Message out;
    switch (static_cast<MessageType>(type)) {
      case MessageType::HelloRequest:
        out = HelloRequest{};
        break;
      case MessageType::HelloResponse: {
        HelloResponse m;
        for (int i = 0; i < 3; ++i)
          m.origin[i] = r.get<double>("origin");
        m.voxel_size = r.get<double>("voxel_size");
        for (auto& d : m.dims)
          d = r.get<std::uint32_t>("dims");
        m.sample_count = r.get<std::uint64_t>("sample_count");
        m.has_baseline = r.get<std::uint8_t>("has_baseline") != 0;
        out = m;
        break;
      }
      case MessageType::ResliceRequest: {
        ResliceRequest m;
        m.id = r.get<std::uint64_t>("id");
        for (int i = 0; i < 3; ++i)
          m.plane.pose.translation[i] = r.get<double>("pose.translation");
        const double qw = r.get<double>("pose.rotation"), qx = r.get<double>("pose.rotation"),
                     qy = r.get<double>("pose.rotation"), qz = r.get<double>("pose.rotation");
        m.plane.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
        m.plane.width = static_cast<int>(std::min(r.get<std::uint32_t>("width"), kMaxImageSide + 1));
        m.plane.height = static_cast<int>(std::min(r.get<std::uint32_t>("height"), kMaxImageSide + 1));
        m.plane.pixel_pitch.x() = r.get<double>("pitch");
        m.plane.pixel_pitch.y() = r.get<double>("pitch");
        m.method = get_enum<Method>(r, 1, "method");
        m.encoding = get_enum<Encoding>(r, 1, "encoding");
        m.override_mask = r.get<std::uint8_t>("override_mask");
        for (double& v : m.overrides)
          v = r.get<double>("overrides");
        out = m;
        break;
      }
      case MessageType::ResliceResponse: {
        ResliceResponse m;
        m.id = r.get<std::uint64_t>("id");
        m.status = get_enum<Status>(r, 2, "status");
        if (m.status == Status::Ok) {
          m.width = r.get<std::uint32_t>("width");
          m.height = r.get<std::uint32_t>("height");
          m.latency_ms = r.get<double>("latency_ms");
          m.encoding = get_enum<Encoding>(r, 1, "encoding");
          const std::size_t n = std::size_t(m.width) * m.height;
          const auto payload = r.get_bytes(r.get<std::uint32_t>("payload_length"), "payload");
          if (m.encoding == Encoding::Raw8) {
            if (payload.size() != n)
              throw DecodeError("raw8 payload length does not match width*height");
            m.pixels.assign(payload.begin(), payload.end());
          } else {
            m.pixels = inflate_bytes(payload, n);
          }
          const auto cov = r.get_bytes(r.get<std::uint32_t>("coverage_length"), "coverage");
          if (cov.size() != (n + 7) / 8)
            throw DecodeError("coverage length does not match width*height");
          m.coverage.assign(cov.begin(), cov.end());
        } else if (m.status == Status::Superseded) {
          m.superseded_by = r.get<std::uint64_t>("superseded_by");
        } else {
          const auto text = r.get_bytes(r.get<std::uint16_t>("error_length"), "error");
          m.error.assign(text.begin(), text.end());
        }
        out = m;
        break;
      }
      default:
        throw DecodeError("unknown message type " + std::to_string(type));
    }
    if (r.remaining() != 0)
      throw DecodeError("trailing bytes after message");
    return out;
  } catch (const DecodeError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DecodeError(e.what());
  }
}

Message decode(std::span<const std::uint8_t> frame)
{
  if (frame.size() < 4)
    throw DecodeError("frame shorter than its length prefix");
  std::uint32_t len;
  std::memcpy(&len, frame.data(), 4);
  if (len != frame.size() - 4)
    throw DecodeError("length prefix does not match frame size");
  return decode_body(frame.subspan(4));
}

std::optional<std::string> validate_request(const ResliceRequest& req)
{
  const auto& p = req.plane;
  if (!p.pose.translation.allFinite())
    return "pose.translation: not finite";
  if (!is_unit(p.pose.rotation))
    return "pose.rotation: not a unit quaternion (|q| = " + std::to_string(p.pose.rotation.norm()) + ")";
  if (p.width <= 0 || p.height <= 0 || p.width > int(kMaxImageSide) || p.height > int(kMaxImageSide))
    return "width/height: must lie in [1, " + std::to_string(kMaxImageSide) + "]";
  if (!(p.pixel_pitch.array() > 0.0).all() || !p.pixel_pitch.allFinite())
    return "pitch: must be positive";
  for (double v : req.overrides)
    if (!std::isfinite(v))
      return "overrides: not finite";
  return std::nullopt;
}

ResliceConfig effective_config(const ResliceRequest& req, const ResliceConfig& base, double voxel_size)
{
  ResliceConfig c = base;
  const auto& o = req.overrides;
  const double max_radius = 8.0 * voxel_size;
  auto threshold = [](double deg) { return std::clamp(deg, 0.1, 89.9); };
  if (req.override_mask & kRadius)
    c.interp_radius = std::clamp(o[0], 1e-3 * voxel_size, max_radius);
  if (req.override_mask & kNormalThreshold)
    c.normal_threshold = threshold(o[1]);
  if (req.override_mask & kInplaneThreshold)
    c.inplane_threshold = threshold(o[2]);
  if (req.override_mask & kNormalK)
    c.k_normal = std::max(0.0, o[3]);
  if (req.override_mask & kInplaneK)
    c.k_inplane = std::max(0.0, o[4]);
  if (req.override_mask & kDistK)
    c.k_dist = std::max(0.0, o[5]);
  return c;
}

std::vector<std::uint8_t> pack_bits(const Mask& m)
{
  std::vector<std::uint8_t> out((static_cast<std::size_t>(m.size()) + 7) / 8, 0);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (m(i / m.cols(), i % m.cols()))
      out[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

Mask unpack_bits(std::span<const std::uint8_t> bits, std::uint32_t width, std::uint32_t height)
{
  Mask m(height, width);
  for (std::size_t i = 0; i < std::size_t(width) * height; ++i)
    m(static_cast<Eigen::Index>(i / width), static_cast<Eigen::Index>(i % width)) = (bits[i / 8] >> (i % 8)) & 1;
  return m;
}

ResliceResponse make_response(std::uint64_t id, const ResliceImage& img, Encoding encoding)
{
  ResliceResponse r;
  r.id = id;
  r.status = Status::Ok;
  r.width = static_cast<std::uint32_t>(img.width());
  r.height = static_cast<std::uint32_t>(img.height());
  r.latency_ms = img.elapsed_ms;
  r.encoding = encoding;
  r.pixels.assign(img.pixels.data(), img.pixels.data() + img.pixels.size());
  r.coverage = pack_bits(img.coverage);
  return r;
}

ResliceImage to_image(const ResliceResponse& r)
{
  if (r.status != Status::Ok)
    throw std::invalid_argument("response carries no image");
  ResliceImage img;
  img.pixels = Eigen::Map<const GrayImage>(r.pixels.data(), r.height, r.width);
  img.coverage = unpack_bits(r.coverage, r.width, r.height);
  img.elapsed_ms = r.latency_ms;
  return img;
}

}  // namespace dare::protocol
