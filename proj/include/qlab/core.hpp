#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the inputs was violated (bad parameters, wrong
/// dimension, infeasible construction).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not deliver a trustworthy value
/// (under-resolved grid, degenerate sampling window, invalid estimate).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A nonnegative extended real: either a finite value or a tagged +inf.
///
/// Quasinorms that diverge are carried as the tag, never as a floating
/// point infinity, so that no arithmetic silently propagates inf/nan.
class Extended {
 public:
  constexpr Extended() = default;
  constexpr explicit Extended(double v) : value_(v) {}

  static constexpr Extended infinity() {
    Extended e;
    e.infinite_ = true;
    return e;
  }

  [[nodiscard]] constexpr bool is_finite() const { return !infinite_; }
  [[nodiscard]] constexpr bool is_infinite() const { return infinite_; }

  [[nodiscard]] double value() const {
    if (infinite_) throw NumericalError("value() requested on a +inf sentinel");
    return value_;
  }

  /// Finite value or the given fallback when infinite.
  [[nodiscard]] constexpr double value_or(double fallback) const {
    return infinite_ ? fallback : value_;
  }

  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const Extended& a, const Extended& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Formats a double so that strtod recovers the identical bits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string Extended::to_string() const {
  return infinite_ ? std::string("+inf") : format_double(value_);
}

/// x^y for x >= 0 that maps 0^y to 0 for y > 0.
inline double pow_nonneg(double x, double y) {
  if (x <= 0.0) return y > 0.0 ? 0.0 : (y == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return std::pow(x, y);
}

/// FNV-1a, 64 bit. Used for content addressing and seed derivation.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the `index`-th job or substream under a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(mix64(root) ^ (index * 0xd1342543de82ef95ULL + 1));
}

}  // namespace qlab
