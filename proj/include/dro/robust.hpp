#pragma once

#include <limits>
#include <stdexcept>

#include "dro/model.hpp"
#include "dro/tensor.hpp"

namespace dro {

/**
 * Knobs of the Wasserstein-ball dual surrogate.
 *
 * The per-sample inner objective is
 *   psi(theta, gamma, zeta; z) = l(theta; (zeta, y)) + gamma * (rho - c(x, zeta))
 * with squared-Euclidean transport cost c. It is strongly concave in zeta
 * whenever 2*gamma exceeds the curvature of the loss in its input; gamma is
 * kept above gamma0 and lzz_estimate is the caller's bound on that loss
 * curvature, giving the concavity estimate 2*gamma0 - lzz_estimate used by
 * the oracle's stopping certificate.
 */
struct RobustConfig {
  double rho = 25.0;
  double gamma0 = 1.0;
  double eta = 0.02;          // inner gradient-ascent step
  double oracle_eps = 1e-6;   // certified suboptimality target
  std::size_t oracle_max_iters = 1000;
  double lzz_estimate = 0.0;
  bool box_feasible = false;  // clip inner iterates to [-1, 1]
};

/// Conservative strong-concavity estimate 2*gamma0 - lzz_estimate.
double concavity_estimate(const RobustConfig& cfg);

/// Model weights plus the scalar dual variable; gamma stays >= gamma0
/// after every prox step.
struct AugmentedParams {
  ModelParams theta;
  double gamma = 0.0;
};

/// Inner-maximization output for one sample. certificate bounds
/// psi(zeta*) - psi(zeta) when produced by the oracle and is +inf for
/// the uncertified single-ascent step.
struct PerturbedDatum {
  Vec zeta;
  Datum base;
  double psi_value = 0.0;
  double certificate = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
};

/// (d/dtheta, d/dgamma) of psi at a perturbed point; the unit exchanged
/// between federated workers and the server.
struct GradientPair {
  Vec d_theta;
  double d_gamma = 0.0;
};

/// Raised when the inner maximization fails to certify within
/// oracle_max_iters; carries the residual certificate.
class oracle_error : public std::runtime_error {
 public:
  oracle_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_certificate(residual) {}
  double residual_certificate;
};

/// Squared Euclidean transport cost ||z - zeta||^2.
double transport_cost(const Vec& z, const Vec& zeta);

/// psi(thetabar, zeta; z) = l(theta; (zeta, y)) + gamma * (rho - c(x, zeta)).
double psi(const ModelSpec& spec, const AugmentedParams& aug, const Vec& zeta,
           const Datum& z, const RobustConfig& cfg);

/// Gradient of psi in zeta: grad_x l(theta; (zeta, y)) - 2*gamma*(zeta - x).
Vec psi_grad_zeta(const ModelSpec& spec, const AugmentedParams& aug, const Vec& zeta,
                  const Datum& z, const RobustConfig& cfg);

/**
 * Epsilon-accurate inner maximization by gradient ascent from zeta = x.
 *
 * Stops once ||grad psi||^2 / (2 * concavity_estimate(cfg)) <= oracle_eps,
 * which certifies psi(zeta*) - psi(zeta) <= oracle_eps under strong
 * concavity. In box_feasible mode iterates are clipped to [-1, 1] and the
 * certificate is computed from the projected-gradient residual instead.
 * Throws oracle_error if the certificate is not reached in
 * oracle_max_iters steps.
 */
PerturbedDatum inner_max_oracle(const ModelSpec& spec, const AugmentedParams& aug,
                                const Datum& z, const RobustConfig& cfg);

/// Single ascent step zeta = x + eta * grad_x l(theta; z); uncertified.
PerturbedDatum inner_single_ascent(const ModelSpec& spec, const AugmentedParams& aug,
                                   const Datum& z, const RobustConfig& cfg);

/// Envelope gradient at a perturbed point: d_theta = grad_theta l(theta; zeta),
/// d_gamma = rho - c(x, zeta).
GradientPair danskin_gradient(const ModelSpec& spec, const AugmentedParams& aug,
                              const PerturbedDatum& pert, const RobustConfig& cfg);

/**
 * Diagnostic estimate of the loss curvature in the input (L_zz): samples
 * directional second differences of grad_x l along random unit directions
 * and returns the largest magnitude seen. Useful for checking that
 * 2*gamma0 exceeds it before trusting the oracle certificate.
 */
double estimate_input_curvature(const ModelSpec& spec, const ModelParams& params,
                                const std::vector<Datum>& data, SeededRng& rng,
                                std::size_t samples);

}  // namespace dro
