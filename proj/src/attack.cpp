#include "dro/attack.hpp"

#include <algorithm>
#include <cmath>

namespace dro {

namespace {

// One FGSM move with the given budget, clipped to the feature box.
Vec signed_step(const ModelSpec& spec, const ModelParams& params, const Vec& x, double y,
                double budget) {
  const Vec g = grad_input(spec, params, Datum{x, y});
  const Vec s = sign(g);
  Vec out = axpy(budget, s, x);
  return clip_box(out, -1.0, 1.0);
}

}  // namespace

Datum fgsm(const ModelSpec& spec, const ModelParams& params, const Datum& z,
           const AttackSpec& atk) {
  Datum out = z;
  out.x = signed_step(spec, params, z.x, z.y, atk.eps_adv);
  return out;
}

Datum ifgsm(const ModelSpec& spec, const ModelParams& params, const Datum& z,
            const AttackSpec& atk) {
  if (atk.steps < 1) throw std::invalid_argument("ifgsm: steps must be >= 1");
  const double per_step =
      atk.ifgsm_full_step ? atk.eps_adv : atk.eps_adv / static_cast<double>(atk.steps);
  Datum out = z;
  for (std::size_t t = 0; t < atk.steps; ++t) {
    out.x = signed_step(spec, params, out.x, z.y, per_step);
  }
  return out;
}

Datum pgd(const ModelSpec& spec, const ModelParams& params, const Datum& z,
          const AttackSpec& atk) {
  if (atk.steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");
  Datum out = z;
  for (std::size_t t = 0; t < atk.steps; ++t) {
    const Vec g = grad_input(spec, params, Datum{out.x, z.y});
    const Vec s = sign(g);
    for (std::size_t i = 0; i < out.x.size(); ++i) {
      double v = out.x[i] + atk.step_size * s[i];
      // project onto the ball around the original input
      v = std::min(z.x[i] + atk.eps_adv, std::max(z.x[i] - atk.eps_adv, v));
      out.x[i] = v;
    }
  }
  out.x = clip_box(out.x, -1.0, 1.0);
  return out;
}

Datum wrm_attack(const ModelSpec& spec, const ModelParams& params, const Datum& z,
                 const AttackSpec& atk, double rho) {
  RobustConfig cfg;
  cfg.rho = rho;
  cfg.gamma0 = atk.wrm_gamma;
  cfg.eta = atk.wrm_eta;
  cfg.oracle_eps = atk.wrm_eps;
  cfg.oracle_max_iters = atk.wrm_max_iters;
  cfg.lzz_estimate = 0.0;
  cfg.box_feasible = true;
  AugmentedParams aug{params, atk.wrm_gamma};
  const PerturbedDatum pert = inner_max_oracle(spec, aug, z, cfg);
  Datum out = z;
  out.x = pert.zeta;
  return out;
}

Datum apply_attack(const ModelSpec& spec, const ModelParams& params, const Datum& z,
                   const AttackSpec& atk, double rho) {
  switch (atk.kind) {
    case AttackKind::Fgsm:
      return fgsm(spec, params, z, atk);
    case AttackKind::Ifgsm:
      return ifgsm(spec, params, z, atk);
    case AttackKind::Pgd:
      return pgd(spec, params, z, atk);
    case AttackKind::Wrm:
      return wrm_attack(spec, params, z, atk, rho);
  }
  throw std::invalid_argument("apply_attack: unknown kind");
}

double evaluate_under_attack(const ModelSpec& spec, const ModelParams& params,
                             const std::vector<Datum>& test_set, const AttackSpec& atk,
                             double rho) {
  if (test_set.empty()) throw std::invalid_argument("evaluate_under_attack: empty test set");
  std::size_t wrong = 0;
  for (const Datum& z : test_set) {
    const Datum adv = apply_attack(spec, params, z, atk, rho);
    if (predict_class(spec, params, adv.x) != z.label()) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test_set.size());
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Fgsm:
      return "fgsm";
    case AttackKind::Ifgsm:
      return "ifgsm";
    case AttackKind::Pgd:
      return "pgd";
    case AttackKind::Wrm:
      return "wrm";
  }
  return "?";
}

}  // namespace dro
