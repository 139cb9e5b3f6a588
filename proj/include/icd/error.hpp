#pragma once

#include <stdexcept>
#include <string>

namespace icd {

// Error families map 1:1 onto CLI exit codes.
enum class Errc {
  generic = 1,
  config = 2,
  transport = 3,
  parse_shortfall = 4,
  evaluation = 5,
  replay_miss = 6,
  data = 7,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Errc code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(code_); }

 private:
  Errc code_;
};

struct ConfigError : Error {
  explicit ConfigError(std::string m) : Error(Errc::config, std::move(m)) {}
};
struct TransportError : Error {
  explicit TransportError(std::string m) : Error(Errc::transport, std::move(m)) {}
};
struct ParseShortfallError : Error {
  explicit ParseShortfallError(std::string m) : Error(Errc::parse_shortfall, std::move(m)) {}
};
struct EvaluationError : Error {
  explicit EvaluationError(std::string m) : Error(Errc::evaluation, std::move(m)) {}
};
struct ReplayMissError : Error {
  explicit ReplayMissError(std::string m) : Error(Errc::replay_miss, std::move(m)) {}
};
struct DataError : Error {
  explicit DataError(std::string m) : Error(Errc::data, std::move(m)) {}
};

}  // namespace icd
