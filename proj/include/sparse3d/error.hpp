#ifndef SPARSE3D_ERROR_HPP_
#define SPARSE3D_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sparse3d {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparse3d

#endif  // SPARSE3D_ERROR_HPP_
