#pragma once

#include <stdexcept>
#include <string>

namespace claimeval {

// Root of every error the library throws.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad input data: corpus records, score files, judge replies. The CLI maps
// these to exit code 2.
class DataError : public Error {
  public:
    using Error::Error;
};

class ParseError : public DataError {
  public:
    ParseError(const std::string &what, std::size_t line)
        : DataError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class SchemaError : public DataError {
  public:
    using DataError::DataError;
};

class ValueError : public DataError {
  public:
    using DataError::DataError;
};

class DuplicateIdError : public DataError {
  public:
    DuplicateIdError(const std::string &id, std::size_t first_line, std::size_t second_line)
        : DataError("duplicate id \"" + id + "\" on lines " + std::to_string(first_line) + " and " +
                    std::to_string(second_line)),
          id_(id), first_line_(first_line), second_line_(second_line) {}
    const std::string &id() const noexcept { return id_; }
    std::size_t first_line() const noexcept { return first_line_; }
    std::size_t second_line() const noexcept { return second_line_; }

  private:
    std::string id_;
    std::size_t first_line_;
    std::size_t second_line_;
};

// Caller passed arguments outside an operation's domain.
class InputError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class TransportError : public Error {
  public:
    using Error::Error;
};

// Training produced a non-finite loss or gradient.
class NumericError : public Error {
  public:
    using Error::Error;
};

} // namespace claimeval
