#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otomo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of a physical model (zero intensity, exposure
// above full scale, zero signal variance, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Pixel too dark for the logarithmic preprocessing; the ray was absorbed
// completely (needle, pulley, opaque parts of the object).
class SaturationError : public DomainError {
 public:
  SaturationError(std::size_t row, std::size_t col, int value);

  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }
  int value() const { return value_; }

 private:
  std::size_t row_;
  std::size_t col_;
  int value_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace otomo
