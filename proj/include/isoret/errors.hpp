#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isoret {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad magic, truncated data, unparsable line).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a structural invariant (degenerate face, isolated vertex, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Caller passed an argument outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Iterative method failed to converge or produced non-finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Runs `f`, prefixing the message of any library error with `label` while
/// keeping its type.
template <class F>
decltype(auto) with_context(std::string_view label, F&& f) {
  const auto wrap = [&](const Error& e) { return std::string(label) + ": " + e.what(); };
  try {
    return f();
  } catch (const FormatError& e) {
    throw FormatError(wrap(e));
  } catch (const ValidationError& e) {
    throw ValidationError(wrap(e));
  } catch (const ArgumentError& e) {
    throw ArgumentError(wrap(e));
  } catch (const NumericError& e) {
    throw NumericError(wrap(e));
  } catch (const IoError& e) {
    throw IoError(wrap(e));
  }
}

}  // namespace isoret
