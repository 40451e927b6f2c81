#pragma once

#include <stdexcept>
#include <string>

namespace hemp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset / file ingestion failures. CLI maps these to exit code 3.
class DataError : public Error {
 public:
  enum class Kind { io, bad_magic, truncated, count_mismatch, bad_value };

  DataError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Malformed compressed container. CLI maps these to exit code 3 as well.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, bad_version, truncated, checksum, bad_field };

  FormatError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Training loss blew past the abort threshold. CLI maps this to exit code 4.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace hemp
