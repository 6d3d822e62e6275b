#pragma once
#include <stdexcept>
#include <string>

namespace respira {

// Error taxonomy mirrors the CLI exit codes: usage = 1, data = 2, numeric = 3.
class Error : public std::runtime_error {
public:
  enum class Kind { usage, data, numeric };

  Error(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Kind kind() const { return kind_; }

  const char* kind_name() const {
    switch (kind_) {
      case Kind::usage: return "usage";
      case Kind::data: return "data";
      case Kind::numeric: return "numeric";
    }
    return "unknown";
  }

private:
  Kind kind_;
};

inline Error usage_error(std::string msg) { return Error(Error::Kind::usage, std::move(msg)); }
inline Error data_error(std::string msg) { return Error(Error::Kind::data, std::move(msg)); }
inline Error numeric_error(std::string msg) { return Error(Error::Kind::numeric, std::move(msg)); }

}  // namespace respira
