#include "dro/tensor.hpp"

#include <cmath>

namespace dro {

namespace {

void require_same_length(const Vec& x, const Vec& y, const char* op) {
  if (x.size() != y.size()) {
    throw dimension_error(std::string(op) + ": length mismatch " +
                          std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Vec axpy(double a, const Vec& x, const Vec& y) {
  require_same_length(x, y, "axpy");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + y[i];
  return out;
}

Vec matvec(const Matrix& A, const Vec& x) {
  if (A.cols != x.size()) {
    throw dimension_error("matvec: matrix cols " + std::to_string(A.cols) +
                          " vs vector length " + std::to_string(x.size()));
  }
  Vec out(A.rows, 0.0);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double acc = 0.0;
    const double* row = A.values.data() + r * A.cols;
    for (std::size_t c = 0; c < A.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

double dot(const Vec& x, const Vec& y) {
  require_same_length(x, y, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

Vec clip_box(const Vec& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clip_box: lo > hi");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(hi, std::max(lo, x[i]));
  return out;
}

Vec sign(const Vec& x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

bool all_finite(const Vec& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SeededRng::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t SeededRng::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  return static_cast<std::size_t>(next_u64() % n);
}

}  // namespace dro
