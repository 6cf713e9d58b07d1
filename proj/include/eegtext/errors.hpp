#ifndef EEGTEXT_ERRORS_HPP_
#define EEGTEXT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace eegtext {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad shapes, domain violations, non-finite values.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Malformed trial files, filenames, manifests.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Missing/unreadable/unwritable files, corrupt containers.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Remote backend transport failures.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& msg) : Error(msg) {}
};

}  // namespace eegtext

#endif  // EEGTEXT_ERRORS_HPP_
