#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lgfed {

// Root of every error thrown by this library. `kind()` maps onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { usage, io, numeric, data, internal };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& w) : Error(Kind::internal, "shape error: " + w) {}
};

class CacheError : public Error {
 public:
  explicit CacheError(const std::string& w) : Error(Kind::internal, "cache error: " + w) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& w) : Error(Kind::numeric, "numeric error: " + w) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& w) : Error(Kind::data, "data error: " + w) {}
};

class FormatError : public Error {
 public:
  FormatError(const std::string& w, std::uint64_t offset)
      : Error(Kind::data, "format error at byte " + std::to_string(offset) + ": " + w),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& w) : Error(Kind::data, "capacity error: " + w) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& w) : Error(Kind::internal, "protocol error: " + w) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(Kind::usage, "configuration error: " + w) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& w) : Error(Kind::usage, "argument error: " + w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(Kind::io, "I/O error: " + w) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& w)
      : Error(Kind::numeric, "undefined metric: " + w) {}
};

}  // namespace lgfed
