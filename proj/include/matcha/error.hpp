#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace matcha {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class ValueError : public Error { public: using Error::Error; };

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at byte " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// compute backend
class ConfigurationError : public Error { public: using Error::Error; };
class BackendUnavailable : public Error { public: using Error::Error; };
class BackendError : public Error { public: using Error::Error; };
class ArgumentError : public Error { public: using Error::Error; };

class CompileError : public Error {
 public:
  CompileError(const std::string& what, std::string token, std::size_t position)
      : Error(what + " near '" + token + "' at column " + std::to_string(position)),
        token_(std::move(token)),
        position_(position) {}
  const std::string& token() const noexcept { return token_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string token_;
  std::size_t position_;
};

// ml
class SingularMatrixError : public Error { public: using Error::Error; };
class ParameterError : public Error { public: using Error::Error; };
class LabelError : public Error { public: using Error::Error; };
class NotFittedError : public Error { public: using Error::Error; };
class RankError : public Error { public: using Error::Error; };

// plot
class EmptyFigureError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

// bench
class ProtocolError : public Error { public: using Error::Error; };

}  // namespace matcha
