#include "dro/robust.hpp"

#include <cmath>

namespace dro {

double concavity_estimate(const RobustConfig& cfg) {
  return 2.0 * cfg.gamma0 - cfg.lzz_estimate;
}

double transport_cost(const Vec& z, const Vec& zeta) {
  if (z.size() != zeta.size()) {
    throw dimension_error("transport_cost: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - zeta[i];
    acc += d * d;
  }
  return acc;
}

double psi(const ModelSpec& spec, const AugmentedParams& aug, const Vec& zeta,
           const Datum& z, const RobustConfig& cfg) {
  const double l = loss(spec, aug.theta, Datum{zeta, z.y});
  return l + aug.gamma * (cfg.rho - transport_cost(z.x, zeta));
}

Vec psi_grad_zeta(const ModelSpec& spec, const AugmentedParams& aug, const Vec& zeta,
                  const Datum& z, const RobustConfig& cfg) {
  (void)cfg;
  Vec g = grad_input(spec, aug.theta, Datum{zeta, z.y});
  // d/dzeta of -gamma * ||x - zeta||^2 is -2*gamma*(zeta - x)
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] -= 2.0 * aug.gamma * (zeta[i] - z.x[i]);
  }
  return g;
}

PerturbedDatum inner_max_oracle(const ModelSpec& spec, const AugmentedParams& aug,
                                const Datum& z, const RobustConfig& cfg) {
  const double lambda_hat = concavity_estimate(cfg);
  if (lambda_hat <= 0.0) {
    throw std::invalid_argument(
        "inner_max_oracle: concavity estimate 2*gamma0 - lzz_estimate must be positive");
  }
  if (cfg.eta <= 0.0) throw std::invalid_argument("inner_max_oracle: eta must be positive");

  Vec zeta = z.x;
  double cert = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter <= cfg.oracle_max_iters; ++iter) {
    const Vec g = psi_grad_zeta(spec, aug, zeta, z, cfg);
    if (cfg.box_feasible) {
      // Projected-gradient residual replaces the raw gradient norm: on the
      // boundary the gradient itself need not vanish at the maximizer.
      const Vec stepped = clip_box(axpy(cfg.eta, g, zeta), -1.0, 1.0);
      double r2 = 0.0;
      for (std::size_t i = 0; i < zeta.size(); ++i) {
        const double d = (stepped[i] - zeta[i]) / cfg.eta;
        r2 += d * d;
      }
      cert = r2 / (2.0 * lambda_hat);
      if (cert <= cfg.oracle_eps) {
        PerturbedDatum out;
        out.zeta = zeta;
        out.base = z;
        out.psi_value = psi(spec, aug, zeta, z, cfg);
        out.certificate = cert;
        out.iterations = iter;
        return out;
      }
      zeta = stepped;
    } else {
      cert = dot(g, g) / (2.0 * lambda_hat);
      if (cert <= cfg.oracle_eps) {
        PerturbedDatum out;
        out.zeta = zeta;
        out.base = z;
        out.psi_value = psi(spec, aug, zeta, z, cfg);
        out.certificate = cert;
        out.iterations = iter;
        return out;
      }
      zeta = axpy(cfg.eta, g, zeta);
    }
    if (!all_finite(zeta)) {
      throw oracle_error("inner_max_oracle: iterate diverged (non-finite zeta)", cert);
    }
  }
  throw oracle_error("inner_max_oracle: no certificate within " +
                         std::to_string(cfg.oracle_max_iters) +
                         " iterations (residual " + std::to_string(cert) + ")",
                     cert);
}

PerturbedDatum inner_single_ascent(const ModelSpec& spec, const AugmentedParams& aug,
                                   const Datum& z, const RobustConfig& cfg) {
  // At zeta = x the transport-cost gradient vanishes, so the ascent
  // direction is just the input gradient of the loss.
  const Vec g = grad_input(spec, aug.theta, z);
  Vec zeta = axpy(cfg.eta, g, z.x);
  if (cfg.box_feasible) zeta = clip_box(zeta, -1.0, 1.0);
  PerturbedDatum out;
  out.zeta = std::move(zeta);
  out.base = z;
  out.psi_value = psi(spec, aug, out.zeta, z, cfg);
  out.certificate = std::numeric_limits<double>::infinity();
  out.iterations = 1;
  return out;
}

GradientPair danskin_gradient(const ModelSpec& spec, const AugmentedParams& aug,
                              const PerturbedDatum& pert, const RobustConfig& cfg) {
  GradientPair gp;
  gp.d_theta = grad_params_single(spec, aug.theta, Datum{pert.zeta, pert.base.y});
  gp.d_gamma = cfg.rho - transport_cost(pert.base.x, pert.zeta);
  return gp;
}

double estimate_input_curvature(const ModelSpec& spec, const ModelParams& params,
                                const std::vector<Datum>& data, SeededRng& rng,
                                std::size_t samples) {
  if (data.empty()) throw std::invalid_argument("estimate_input_curvature: empty data");
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const Datum& z = data[rng.uniform_index(data.size())];
    Vec d(z.x.size());
    for (double& v : d) v = rng.normal();
    const double n = norm2(d);
    if (n == 0.0) continue;
    for (double& v : d) v /= n;
    const Datum zp{axpy(h, d, z.x), z.y};
    const Datum zm{axpy(-h, d, z.x), z.y};
    const Vec gp = grad_input(spec, params, zp);
    const Vec gm = grad_input(spec, params, zm);
    // d' H d approximated by the symmetric difference of grad_x along d
    double curv = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) curv += (gp[i] - gm[i]) * d[i];
    curv /= 2.0 * h;
    worst = std::max(worst, std::abs(curv));
  }
  return worst;
}

}  // namespace dro
