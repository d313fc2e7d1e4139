#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpo {

// Continuous 2-D quantity: pixel coordinates (x = column, y = row, pixel
// centers on integers) as well as displacements in pixels.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 &operator+=(const Vec2 &o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2 &operator-=(const Vec2 &o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2 &operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

using PixelCoord = Vec2;

constexpr double dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }
constexpr double norm2(const Vec2 &a) { return dot(a, a); }
inline double norm(const Vec2 &a) { return std::sqrt(norm2(a)); }
inline bool is_finite(const Vec2 &a) { return std::isfinite(a.x) && std::isfinite(a.y); }

// Error taxonomy. Every failure surfaced by the library is one of these.
enum class ErrorKind {
  Argument,
  Io,
  Format,
  DegenerateInput,
  NoConsensus,
  DegeneratePoint,
  Consistency,
  Numerical,
  Usage,
  Generation,
};

const char *to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) { throw Error(kind, what); }

inline double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

const char *version_string();
// Version plus the source revision the library was built from.
const char *build_id();

} // namespace gpo
