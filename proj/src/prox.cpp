#include "dro/prox.hpp"

#include <cmath>

namespace dro {

double reg_value(const RegularizerSpec& reg, const Vec& theta) {
  switch (reg.kind) {
    case RegKind::None:
      return 0.0;
    case RegKind::L1: {
      double acc = 0.0;
      for (double v : theta) acc += std::abs(v);
      return reg.weight * acc;
    }
    case RegKind::L2Sq:
      return reg.weight * dot(theta, theta);
  }
  return 0.0;
}

Vec prox_theta(const RegularizerSpec& reg, const Vec& v, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("prox: alpha must be positive");
  if (reg.weight < 0.0) throw std::invalid_argument("prox: weight must be >= 0");
  switch (reg.kind) {
    case RegKind::None:
      return v;
    case RegKind::L1: {
      const double t = alpha * reg.weight;
      Vec out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > t) {
          out[i] = v[i] - t;
        } else if (v[i] < -t) {
          out[i] = v[i] + t;
        } else {
          out[i] = 0.0;
        }
      }
      return out;
    }
    case RegKind::L2Sq: {
      const double s = 1.0 / (1.0 + 2.0 * alpha * reg.weight);
      Vec out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = s * v[i];
      return out;
    }
  }
  return v;
}

AugmentedParams prox_step(const RegularizerSpec& reg, const AugmentedParams& v,
                          double alpha, double gamma0) {
  AugmentedParams out;
  out.theta.flat = prox_theta(reg, v.theta.flat, alpha);
  out.gamma = std::max(v.gamma, gamma0);
  return out;
}

std::string to_string(RegKind kind) {
  switch (kind) {
    case RegKind::None:
      return "none";
    case RegKind::L1:
      return "l1";
    case RegKind::L2Sq:
      return "l2sq";
  }
  return "?";
}

}  // namespace dro
