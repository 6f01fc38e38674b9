#pragma once

#include <stdexcept>
#include <string>

namespace mgsgan {

/// Violated precondition of a public operation.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Incompatible tensor shapes; the message names both shapes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A forward op produced NaN or Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad dataset contents, out-of-range labels, missing classes, or
/// checkpoint/dataset incompatibility.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace mgsgan
