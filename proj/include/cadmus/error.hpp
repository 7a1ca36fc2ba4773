#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cadmus {

// Base for every error raised by the library. Subclasses name the failure;
// callers that only need a message can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownSymbol : public Error {
 public:
  UnknownSymbol(std::size_t position, char symbol)
      : Error("unknown symbol '" + std::string(1, symbol) + "' at position " + std::to_string(position)),
        position_(position),
        symbol_(symbol) {}
  std::size_t position() const { return position_; }
  char symbol() const { return symbol_; }

 private:
  std::size_t position_;
  char symbol_;
};

class UnprintableToken : public Error {
 public:
  explicit UnprintableToken(int token)
      : Error("token id " + std::to_string(token) + " has no glyph in this form"), token_(token) {}
  int token() const { return token_; }

 private:
  int token_;
};

class ReservedOpcode : public Error {
 public:
  explicit ReservedOpcode(int token) : Error("opcode " + std::to_string(token) + " is reserved") {}
};

class NotRepairable : public Error {
 public:
  using Error::Error;
};

class AlphabetContainsEnd : public Error {
 public:
  AlphabetContainsEnd() : Error("value-program alphabet must not contain the end token '.'") {}
};

class UnreachableValue : public Error {
 public:
  explicit UnreachableValue(std::int64_t value)
      : Error("no value program computes " + std::to_string(value)), value_(value) {}
  std::int64_t value() const { return value_; }

 private:
  std::int64_t value_;
};

class DigestMismatch : public Error {
 public:
  DigestMismatch(const std::string& expected, const std::string& actual)
      : Error("dataset digest mismatch: manifest says " + expected + ", data file hashes to " + actual) {}
};

class UnknownFormatVersion : public Error {
 public:
  explicit UnknownFormatVersion(int version)
      : Error("unknown dataset format version " + std::to_string(version)) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

class PredictorTimeout : public Error {
 public:
  using Error::Error;
};

class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

class MalformedResponseFile : public Error {
 public:
  using Error::Error;
};

}  // namespace cadmus
