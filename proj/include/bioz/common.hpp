#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bioz {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

// Thrown when a caller breaks a documented precondition.
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Frequency or impedance outside what a model or gain range can answer.
struct RangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ContractViolation(what);
}

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double deg) { return deg * kPi / 180.0; }

}  // namespace bioz
