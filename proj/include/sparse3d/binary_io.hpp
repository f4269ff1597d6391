#ifndef SPARSE3D_BINARY_IO_HPP_
#define SPARSE3D_BINARY_IO_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace sparse3d::binary {

// Little-endian primitives independent of host byte order. Readers throw
// FormatError on truncation.
void write_u32(std::ostream& out, std::uint32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
void write_f32(std::ostream& out, float value);
void write_f64(std::ostream& out, double value);
void write_magic(std::ostream& out, std::string_view magic);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);
std::string read_bytes(std::istream& in, std::size_t n);
void expect_magic(std::istream& in, std::string_view magic);

}  // namespace sparse3d::binary

#endif  // SPARSE3D_BINARY_IO_HPP_
