#pragma once

#include <string>
#include <vector>

#include "dro/model.hpp"
#include "dro/robust.hpp"
#include "dro/tensor.hpp"

namespace dro {

enum class AttackKind { Fgsm, Ifgsm, Pgd, Wrm };

/**
 * Test-time attack configuration. eps_adv is the l-infinity budget,
 * steps the iteration count of the iterative kinds, step_size the PGD
 * per-step magnitude. IFGSM splits eps_adv across steps by default so
 * the total displacement stays within budget; ifgsm_full_step restores
 * the full-epsilon-per-step variant. The wrm_* fields drive the
 * fixed-gamma Wasserstein attack's inner oracle.
 */
struct AttackSpec {
  AttackKind kind = AttackKind::Fgsm;
  double eps_adv = 0.1;
  std::size_t steps = 10;
  double step_size = 1.0;
  bool ifgsm_full_step = false;
  double wrm_gamma = 1.0;
  double wrm_eta = 0.05;
  double wrm_eps = 1e-6;
  std::size_t wrm_max_iters = 2000;
};

/// Single signed-gradient step, clipped to the [-1, 1] feature box.
Datum fgsm(const ModelSpec& spec, const ModelParams& params, const Datum& z,
           const AttackSpec& atk);

/// steps repetitions of the FGSM step (per-step budget eps_adv/steps
/// unless ifgsm_full_step), clipping to the box after each step.
Datum ifgsm(const ModelSpec& spec, const ModelParams& params, const Datum& z,
            const AttackSpec& atk);

/// Projected signed-gradient iteration within the l-infinity ball of
/// radius eps_adv around the original input, then a final box clip.
Datum pgd(const ModelSpec& spec, const ModelParams& params, const Datum& z,
          const AttackSpec& atk);

/// Fixed-gamma Wasserstein attack: the inner maximization of the dual
/// surrogate solved by the certified oracle with iterates kept in the
/// feature box. Oracle failures propagate.
Datum wrm_attack(const ModelSpec& spec, const ModelParams& params, const Datum& z,
                 const AttackSpec& atk, double rho);

Datum apply_attack(const ModelSpec& spec, const ModelParams& params, const Datum& z,
                   const AttackSpec& atk, double rho = 25.0);

/// White-box misclassification rate over the attacked test set.
double evaluate_under_attack(const ModelSpec& spec, const ModelParams& params,
                             const std::vector<Datum>& test_set, const AttackSpec& atk,
                             double rho = 25.0);

std::string to_string(AttackKind kind);

}  // namespace dro
