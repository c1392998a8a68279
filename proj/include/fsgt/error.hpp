#pragma once

#include <stdexcept>
#include <string>

namespace fsgt {

// Error taxonomy. The CLI maps ConfigError -> 2, DataError (and subclasses) -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed file: wrong length, bad header, unparsable manifest.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Checksum mismatch.
class CorruptDataError : public DataError {
 public:
  using DataError::DataError;
};

// Argument outside an operation's domain (nonpositive log input, q out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsgt
