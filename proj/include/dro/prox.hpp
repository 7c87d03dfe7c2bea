#pragma once

#include "dro/robust.hpp"
#include "dro/tensor.hpp"

namespace dro {

enum class RegKind { None, L1, L2Sq };

/// r(theta): none, beta*||theta||_1, or beta*||theta||_2^2.
struct RegularizerSpec {
  RegKind kind = RegKind::None;
  double weight = 0.0;
};

double reg_value(const RegularizerSpec& reg, const Vec& theta);

/// Proximal map of alpha*r on the theta block: identity, elementwise
/// soft-threshold by alpha*beta, or scaling by 1/(1 + 2*alpha*beta).
Vec prox_theta(const RegularizerSpec& reg, const Vec& v, double alpha);

/**
 * Joint prox of alpha*(r(theta) + indicator{gamma >= gamma0}) at the
 * pre-prox point v: theta block as prox_theta, gamma projected up to
 * gamma0. alpha must be positive.
 */
AugmentedParams prox_step(const RegularizerSpec& reg, const AugmentedParams& v,
                          double alpha, double gamma0);

std::string to_string(RegKind kind);

}  // namespace dro
