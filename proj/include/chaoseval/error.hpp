#ifndef CHAOSEVAL_ERROR_HPP
#define CHAOSEVAL_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace chaoseval {

inline constexpr std::string_view kVersion = "0.1.0";

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or option combinations (CLI exit status 1).
class UsageError : public Error {
public:
  using Error::Error;
};

/// Input data that violates a record or store invariant (CLI exit status 2).
class DataError : public Error {
public:
  using Error::Error;
};

} // namespace chaoseval

#endif // CHAOSEVAL_ERROR_HPP
