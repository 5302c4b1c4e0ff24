#ifndef GMG_COMMON_HPP
#define GMG_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace gmg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  DimensionMismatch,
  ZeroVectorInCosine,
  DegenerateScale,
  NonFiniteCost,
  NotConverged,
  TooLarge,
  DegenerateGradient,
  InputNotFound,
  ConfigParse,
  Io,
};

inline const char* error_code_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "E_DIM_MISMATCH";
    case ErrorCode::ZeroVectorInCosine: return "E_ZERO_VECTOR";
    case ErrorCode::DegenerateScale: return "E_DEGENERATE_SCALE";
    case ErrorCode::NonFiniteCost: return "E_NONFINITE_COST";
    case ErrorCode::NotConverged: return "E_NOT_CONVERGED";
    case ErrorCode::TooLarge: return "E_TOO_LARGE";
    case ErrorCode::DegenerateGradient: return "E_DEGENERATE_GRADIENT";
    case ErrorCode::InputNotFound: return "E_INPUT_NOT_FOUND";
    case ErrorCode::ConfigParse: return "E_CONFIG_PARSE";
    case ErrorCode::Io: return "E_IO";
  }
  return "E_UNKNOWN";
}

/// Domain error with a stable code string. Exit class 1 covers bad input,
/// 2 covers internal failures (non-convergence past policy caps).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

  int exit_class() const {
    switch (code_) {
      case ErrorCode::NotConverged:
      case ErrorCode::DegenerateGradient:
      case ErrorCode::Io:
        return 2;
      default:
        return 1;
    }
  }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

/// Formats a double with 17 significant digits so that reruns produce
/// byte-identical output files.
inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace gmg

#endif  // GMG_COMMON_HPP
