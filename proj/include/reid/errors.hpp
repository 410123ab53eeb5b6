#pragma once

#include <stdexcept>
#include <string>

namespace reid {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Text input could not be parsed (non-integer field, malformed line).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Binary input has the wrong magic/version or an impossible header.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read, or written; includes truncation.
class IoError : public Error {
 public:
  using Error::Error;
};

// Rethrows the in-flight reid::Error as the same type with "context: "
// prepended to the message. Must be called from inside a catch block.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const IoError& e) {
    throw IoError(context + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(context + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(context + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  }
}

}  // namespace reid
