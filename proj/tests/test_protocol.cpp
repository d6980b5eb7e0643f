#include "dare/protocol.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstring>

using namespace dare;
using namespace dare::protocol;
using nlohmann::json;

namespace {

using Bytes = std::vector<std::uint8_t>;

const std::filesystem::path& fixture_dir()
{
  static const auto dir = test::source_dir() / "tests" / "fixtures" / "protocol";
  return dir;
}

Bytes fixture(const std::string& name)
{
  const std::string s = test::read_file(fixture_dir() / (name + ".bin"));
  REQUIRE_FALSE(s.empty());
  return {s.begin(), s.end()};
}

const json& expected()
{
  static const json j = json::parse(test::read_file(fixture_dir() / "expected.json"));
  return j;
}

ResliceResponse response_from(const json& j)
{
  ResliceResponse r;
  r.id = j["id"];
  const std::string status = j["status"];
  if (status == "ok") {
    r.status = Status::Ok;
    r.width = j["width"];
    r.height = j["height"];
    r.latency_ms = j["latency_ms"];
    r.encoding = static_cast<Encoding>(j["encoding"].get<int>());
    r.pixels = j["pixels"].get<Bytes>();
    Mask m(r.height, r.width);
    const auto cov = j["coverage"].get<std::vector<bool>>();
    for (std::size_t i = 0; i < cov.size(); ++i)
      m(static_cast<Eigen::Index>(i / r.width), static_cast<Eigen::Index>(i % r.width)) = cov[i];
    r.coverage = pack_bits(m);
  } else if (status == "superseded") {
    r.status = Status::Superseded;
    r.superseded_by = j["superseded_by"];
  } else {
    r.status = Status::Error;
    r.error = j["error"];
  }
  return r;
}

void check_same(const ResliceResponse& a, const ResliceResponse& b)
{
  CHECK(a.id == b.id);
  CHECK(a.status == b.status);
  CHECK(a.width == b.width);
  CHECK(a.height == b.height);
  CHECK(a.latency_ms == b.latency_ms);
  CHECK(a.encoding == b.encoding);
  CHECK(a.pixels == b.pixels);
  CHECK(a.coverage == b.coverage);
  CHECK(a.superseded_by == b.superseded_by);
  CHECK(a.error == b.error);
}

ResliceRequest random_request(std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_int_distribution<int> side(1, 4096), bit(0, 1), byte(0, 63);
  ResliceRequest r;
  r.id = rng();
  r.plane.pose.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
  r.plane.pose.rotation = test::random_rotation(rng);
  r.plane.width = side(rng);
  r.plane.height = side(rng);
  r.plane.pixel_pitch = Eigen::Vector2d(std::abs(u(rng)) + 0.01, std::abs(u(rng)) + 0.01);
  r.method = static_cast<Method>(bit(rng));
  r.encoding = static_cast<Encoding>(bit(rng));
  r.override_mask = static_cast<std::uint8_t>(byte(rng));
  for (double& o : r.overrides)
    o = u(rng);
  return r;
}

}  // namespace

TEST_CASE("golden frames decode to the documented values")
{
  SUBCASE("hello request")
  {
    const auto b = fixture("hello_request");
    CHECK(std::holds_alternative<HelloRequest>(decode(b)));
    CHECK(encode(HelloRequest{}) == b);
  }
  SUBCASE("hello response")
  {
    const auto b = fixture("hello_response");
    const auto& e = expected()["hello_response"];
    const auto m = std::get<HelloResponse>(decode(b));
    CHECK(m.origin == Eigen::Vector3d(e["origin"][0], e["origin"][1], e["origin"][2]));
    CHECK(m.voxel_size == e["voxel_size"].get<double>());
    CHECK(m.dims == e["dims"].get<std::array<std::uint32_t, 3>>());
    CHECK(m.sample_count == e["sample_count"].get<std::uint64_t>());
    CHECK(m.has_baseline);
    CHECK(encode(m) == b);
  }
  SUBCASE("reslice request")
  {
    const auto b = fixture("reslice_request");
    const auto& e = expected()["reslice_request"];
    const auto m = std::get<ResliceRequest>(decode(b));
    CHECK(m.id == 42);
    CHECK(m.plane.pose.translation == Eigen::Vector3d(1.5, -2.0, 3.25));
    CHECK(m.plane.pose.rotation.coeffs() == Eigen::Vector4d(0.5, 0.5, 0.5, 0.5));
    CHECK(m.plane.width == e["width"].get<int>());
    CHECK(m.plane.height == e["height"].get<int>());
    CHECK(m.plane.pixel_pitch == Eigen::Vector2d(0.125, 0.0625));
    CHECK(m.method == Method::Baseline);
    CHECK(m.encoding == Encoding::Deflate);
    CHECK(m.override_mask == (kRadius | kDistK));
    CHECK(m.overrides == e["overrides"].get<std::array<double, 6>>());
    CHECK(encode(m) == b);
  }
  SUBCASE("responses")
  {
    for (const char* name : {"reslice_response_raw8", "reslice_response_superseded", "reslice_response_error"}) {
      INFO(name);
      const auto b = fixture(name);
      const auto want = response_from(expected()[name]);
      check_same(std::get<ResliceResponse>(decode(b)), want);
      CHECK(encode(want) == b);
    }
  }
  SUBCASE("deflate response: decoded pixels match, compressed bytes may differ")
  {
    const auto b = fixture("reslice_response_deflate");
    const auto want = response_from(expected()["reslice_response_deflate"]);
    const auto got = std::get<ResliceResponse>(decode(b));
    check_same(got, want);
    check_same(std::get<ResliceResponse>(decode(encode(want))), want);
  }
}

TEST_CASE("fixture coverage bits are LSB first")
{
  const auto r = std::get<ResliceResponse>(decode(fixture("reslice_response_raw8")));
  REQUIRE(r.coverage.size() == 2);
  CHECK(r.coverage[0] == 0xFF);
  CHECK(r.coverage[1] == 0x07);
  const auto img = to_image(r);
  CHECK_FALSE(img.coverage(2, 3));
  CHECK(img.coverage.count() == 11);
  CHECK(img.pixels(0, 0) == 255);
  CHECK(img.pixels(0, 1) == 0);
  CHECK(img.pixels(1, 1) == 255);
}

TEST_CASE("frame header layout")
{
  const auto b = fixture("reslice_request");
  std::uint32_t len;
  std::memcpy(&len, b.data(), 4);
  CHECK(len == b.size() - 4);
  CHECK(b[4] == kVersion);
  CHECK(b[5] == 0x02);
  CHECK(b.size() == 4 + 2 + 8 + 24 + 32 + 8 + 16 + 3 + 48);
}

TEST_CASE("randomized round trips")
{
  std::mt19937_64 rng(314);
  for (int i = 0; i < 500; ++i) {
    const auto req = random_request(rng);
    const auto back = std::get<ResliceRequest>(decode(encode(req)));
    CHECK(back.id == req.id);
    CHECK(back.plane.pose.translation == req.plane.pose.translation);
    CHECK(back.plane.pose.rotation.coeffs() == req.plane.pose.rotation.coeffs());
    CHECK(back.plane.width == req.plane.width);
    CHECK(back.plane.height == req.plane.height);
    CHECK(back.plane.pixel_pitch == req.plane.pixel_pitch);
    CHECK(back.method == req.method);
    CHECK(back.encoding == req.encoding);
    CHECK(back.override_mask == req.override_mask);
    CHECK(back.overrides == req.overrides);
  }
  std::uniform_int_distribution<int> side(1, 70), gray(0, 255), bit(0, 1);
  for (int i = 0; i < 200; ++i) {
    ResliceImage img;
    img.pixels.resize(side(rng), side(rng));
    img.coverage.resize(img.pixels.rows(), img.pixels.cols());
    for (Eigen::Index k = 0; k < img.pixels.size(); ++k) {
      img.pixels.data()[k] = static_cast<std::uint8_t>(gray(rng) / 64 * 64);
      img.coverage.data()[k] = bit(rng);
    }
    img.elapsed_ms = i * 0.5;
    for (Encoding enc : {Encoding::Raw8, Encoding::Deflate}) {
      const auto r = make_response(rng(), img, enc);
      const auto back = std::get<ResliceResponse>(decode(encode(r)));
      check_same(back, r);
      const auto out = to_image(back);
      CHECK((out.pixels == img.pixels).all());
      CHECK((out.coverage == img.coverage).all());
    }
  }
}

TEST_CASE("decode rejects malformed frames")
{
  auto good = encode(HelloResponse{});
  SUBCASE("length prefix mismatch")
  {
    good.pop_back();
    CHECK_THROWS_AS(decode(good), DecodeError);
  }
  SUBCASE("short frame")
  {
    CHECK_THROWS_AS(decode(Bytes{1, 0}), DecodeError);
  }
  SUBCASE("truncated body")
  {
    CHECK_THROWS_AS(decode_body(std::span(good).subspan(4, 10)), DecodeError);
  }
  SUBCASE("bad version")
  {
    good[4] = 2;
    CHECK_THROWS_WITH_AS(decode(good), doctest::Contains("version"), DecodeError);
  }
  SUBCASE("unknown type")
  {
    good[5] = 0x7F;
    CHECK_THROWS_WITH_AS(decode(good), doctest::Contains("unknown message type"), DecodeError);
  }
  SUBCASE("trailing bytes")
  {
    good.push_back(0);
    good[0] += 1;
    CHECK_THROWS_AS(decode(good), DecodeError);
  }
  SUBCASE("invalid enum values")
  {
    auto req = encode(ResliceRequest{});
    req[4 + 2 + 8 + 24 + 32 + 8 + 16] = 9;  // method
    CHECK_THROWS_WITH_AS(decode(req), doctest::Contains("method"), DecodeError);
  }
  SUBCASE("payload size mismatch")
  {
    ResliceImage img;
    img.pixels = GrayImage::Constant(2, 2, 9);
    img.coverage = Mask::Constant(2, 2, true);
    auto b = encode(make_response(1, img, Encoding::Raw8));
    b[4 + 2 + 8 + 1] = 3;  // width 3 with a 4-byte payload
    CHECK_THROWS_AS(decode(b), DecodeError);
  }
  SUBCASE("corrupt deflate stream")
  {
    ResliceImage img;
    img.pixels = GrayImage::Constant(8, 8, 9);
    img.coverage = Mask::Constant(8, 8, true);
    auto b = encode(make_response(1, img, Encoding::Deflate));
    b[4 + 2 + 8 + 1 + 4 + 4 + 8 + 1 + 4 + 2] ^= 0xFF;
    CHECK_THROWS_AS(decode(b), DecodeError);
  }
}

TEST_CASE("override clamps")
{
  ResliceRequest r;
  const ResliceConfig base;
  SUBCASE("no bits keeps the base config")
  {
    r.overrides = {9, 9, 9, 9, 9, 9};
    const auto c = effective_config(r, base, 0.125);
    CHECK(c.interp_radius == base.interp_radius);
    CHECK(c.k_dist == base.k_dist);
  }
  SUBCASE("radius is capped at 8 voxels")
  {
    r.override_mask = kRadius;
    r.overrides[0] = 50.0;
    CHECK(effective_config(r, base, 0.125).interp_radius == 1.0);
    r.overrides[0] = -1.0;
    CHECK(effective_config(r, base, 0.125).interp_radius > 0.0);
  }
  SUBCASE("thresholds stay inside (0, 90)")
  {
    r.override_mask = kNormalThreshold | kInplaneThreshold;
    r.overrides[1] = 120.0;
    r.overrides[2] = -5.0;
    const auto c = effective_config(r, base, 0.125);
    CHECK(c.normal_threshold == 89.9);
    CHECK(c.inplane_threshold == 0.1);
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("exponents are non-negative")
  {
    r.override_mask = kNormalK | kInplaneK | kDistK;
    r.overrides[3] = -2.0;
    r.overrides[4] = 3.0;
    r.overrides[5] = 0.0;
    const auto c = effective_config(r, base, 0.125);
    CHECK(c.k_normal == 0.0);
    CHECK(c.k_inplane == 3.0);
    CHECK(c.k_dist == 0.0);
  }
}

TEST_CASE("request validation names the offending field")
{
  ResliceRequest r;
  r.plane.width = r.plane.height = 8;
  CHECK_FALSE(validate_request(r));
  SUBCASE("rotation")
  {
    r.plane.pose.rotation = Eigen::Quaterniond(2, 0, 0, 0);
    CHECK(validate_request(r)->rfind("pose.rotation", 0) == 0);
  }
  SUBCASE("translation")
  {
    r.plane.pose.translation.x() = NAN;
    CHECK(validate_request(r)->rfind("pose.translation", 0) == 0);
  }
  SUBCASE("size")
  {
    r.plane.width = 4097;
    CHECK(validate_request(r)->rfind("width", 0) == 0);
    r.plane.width = 0;
    CHECK(validate_request(r));
  }
  SUBCASE("pitch")
  {
    r.plane.pixel_pitch.y() = 0.0;
    CHECK(validate_request(r)->rfind("pitch", 0) == 0);
  }
  SUBCASE("overrides")
  {
    r.overrides[2] = INFINITY;
    CHECK(validate_request(r)->rfind("overrides", 0) == 0);
  }
}

TEST_CASE("bit packing")
{
  Mask m(3, 3);
  m << true, false, false, false, false, false, false, false, true;
  const auto bits = pack_bits(m);
  REQUIRE(bits.size() == 2);
  CHECK(bits[0] == 0x01);
  CHECK(bits[1] == 0x01);
  CHECK((unpack_bits(bits, 3, 3) == m).all());
  CHECK(pack_bits(Mask::Constant(2, 4, true)) == Bytes{0xFF});
}
