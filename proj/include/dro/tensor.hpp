#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dro {

using Vec = std::vector<double>;

/// Thrown when operand shapes do not agree.
class dimension_error : public std::runtime_error {
 public:
  explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

/// Row-major dense matrix of 64-bit reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  static Matrix identity(std::size_t n);
};

// result[i] = a * x[i] + y[i]
Vec axpy(double a, const Vec& x, const Vec& y);

Vec matvec(const Matrix& A, const Vec& x);

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);

/// Elementwise clamp to [lo, hi]; requires lo <= hi.
Vec clip_box(const Vec& x, double lo, double hi);

/// Elementwise sign with sign(0) = 0.
Vec sign(const Vec& x);

bool all_finite(const Vec& x);

/**
 * Deterministic RNG: xoshiro256++ seeded via SplitMix64.
 *
 * The generator is fixed so that a given seed yields the same stream on
 * every platform; all sampling helpers below consume a fixed number of
 * raw draws per call (normal() always consumes two).
 */
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; consumes exactly two raw draws.
  double normal();

  /// Uniform index in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

}  // namespace dro
