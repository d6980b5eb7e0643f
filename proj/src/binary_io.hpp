#ifndef DARE_SRC_BINARY_IO_HPP
#define DARE_SRC_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

static_assert(std::endian::native == std::endian::little, "file and wire formats assume a little-endian host");

namespace dare::detail {

template <typename T>
void put(std::ostream& out, T value)
{
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void put_span(std::ostream& out, std::span<const T> values)
{
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
T get(std::istream& in, const char* what)
{
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw std::runtime_error(std::string("unexpected end of file reading ") + what);
  return value;
}

template <typename T>
void get_span(std::istream& in, std::span<T> values, const char* what)
{
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes())))
    throw std::runtime_error(std::string("unexpected end of file reading ") + what);
}

// Growable little-endian byte buffer used by the wire protocol.
class ByteWriter {
 public:
  template <typename T>
  void put(T value)
  {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  template <typename T>
  T get(const char* what)
  {
    static_assert(std::is_trivially_copyable_v<T>);
    if (remaining() < sizeof(T))
      throw std::runtime_error(std::string("message truncated at field ") + what);
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n, const char* what)
  {
    if (remaining() < n)
      throw std::runtime_error(std::string("message truncated at field ") + what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace dare::detail

#endif  // DARE_SRC_BINARY_IO_HPP
