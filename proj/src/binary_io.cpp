#include "sparse3d/binary_io.hpp"

#include <array>
#include <bit>

#include "sparse3d/error.hpp"

namespace sparse3d::binary {

namespace {

template <std::size_t N>
void put(std::ostream& out, std::uint64_t value) {
  std::array<char, N> bytes{};
  for (std::size_t i = 0; i < N; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(bytes.data(), N);
  if (!out) throw Error("write failed");
}

template <std::size_t N>
std::uint64_t get(std::istream& in) {
  std::array<char, N> bytes{};
  in.read(bytes.data(), N);
  if (in.gcount() != static_cast<std::streamsize>(N)) throw FormatError("truncated file");
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < N; ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return value;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t value) { put<4>(out, value); }
void write_u64(std::ostream& out, std::uint64_t value) { put<8>(out, value); }
void write_f32(std::ostream& out, float value) { put<4>(out, std::bit_cast<std::uint32_t>(value)); }
void write_f64(std::ostream& out, double value) { put<8>(out, std::bit_cast<std::uint64_t>(value)); }

void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!out) throw Error("write failed");
}

std::uint32_t read_u32(std::istream& in) { return static_cast<std::uint32_t>(get<4>(in)); }
std::uint64_t read_u64(std::istream& in) { return get<8>(in); }
float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string read_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) throw FormatError("truncated file");
  return s;
}

void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(magic.size()));
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic) {
    throw FormatError("bad magic: expected '" + std::string(magic) + "'");
  }
}

}  // namespace sparse3d::binary
