#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dro/model.hpp"
#include "dro/prox.hpp"
#include "dro/robust.hpp"
#include "dro/tensor.hpp"

namespace dro {

enum class Algorithm { SpgdOracle, Spgda, ErmSgd, ErmAdam };

struct TrainConfig {
  Algorithm algorithm = Algorithm::Spgda;
  double alpha = 0.001;         // outer (proximal) step size
  std::size_t iterations = 1000;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
};

/**
 * One evaluation record. train_loss is the batch-mean objective estimate
 * (psi at the perturbed points for the robust trainers, plain loss for
 * ERM); grad_map_norm is the prox-gradient stationarity diagnostic;
 * oracle_iters_mean is NaN except for spgd-oracle.
 */
struct MetricsRecord {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  double misclass_rate = 0.0;
  double grad_map_norm = 0.0;
  double oracle_iters_mean = 0.0;
  double wall_ms = 0.0;
};

struct RunMetrics {
  std::vector<MetricsRecord> records;
};

/// CSV serialization. Wall-clock time is deliberately left out so that
/// reruns of the same seeded configuration are byte-identical; the JSON
/// form carries it.
void write_csv(const RunMetrics& metrics, std::ostream& out);
void write_json(const RunMetrics& metrics, std::ostream& out);

struct TrainResult {
  AugmentedParams params;
  RunMetrics metrics;
};

struct ErmResult {
  ModelParams params;
  RunMetrics metrics;
};

/**
 * Seed discipline shared by the centralized trainers and the federated
 * simulation: parameter initialization draws from seed ^ kParamInitTag,
 * minibatch sampling from seed ^ worker_id (worker 0 for centralized
 * runs). Keeping the streams separate makes a one-worker federation
 * reproduce the centralized trajectory bit for bit.
 */
constexpr std::uint64_t kParamInitTag = 0x9e3779b97f4a7c15ULL;

inline SeededRng param_init_rng(std::uint64_t seed) { return SeededRng(seed ^ kParamInitTag); }
inline SeededRng sample_stream_rng(std::uint64_t seed, std::uint64_t worker_id) {
  return SeededRng(seed ^ worker_id);
}

/// m i.i.d. (with replacement) indices into [0, n).
std::vector<std::size_t> draw_batch_indices(SeededRng& rng, std::size_t n, std::size_t m);

/// Initial dual value: start strictly inside Gamma.
inline double initial_gamma(const RobustConfig& cfg) { return 2.0 * cfg.gamma0; }

enum class InnerMethod { Oracle, SingleAscent };

/// Batch-mean envelope gradient plus bookkeeping; the one reduction used
/// by the centralized trainers and the federated workers (fixed sample
/// order, so identical inputs give bitwise-identical results).
struct RobustBatchGrad {
  Vec g_theta;
  double g_gamma = 0.0;
  double mean_psi = 0.0;
  double mean_oracle_iters = 0.0;
};

RobustBatchGrad robust_batch_gradient(const ModelSpec& spec, const AugmentedParams& aug,
                                      const RobustConfig& rcfg,
                                      const std::vector<Datum>& batch, InnerMethod method);

/**
 * Stochastic proximal gradient descent with the epsilon-accurate inner
 * oracle: per iteration, solve the inner maximization per batch sample,
 * average the envelope gradients, and take one prox step on [theta, gamma].
 * Deterministic given the seed. Oracle failures propagate with the
 * iteration index attached; non-finite gradients abort.
 */
TrainResult train_spgd_oracle(const ModelSpec& spec, const RegularizerSpec& reg,
                              const RobustConfig& rcfg, const TrainConfig& tcfg,
                              const std::vector<Datum>& data,
                              const std::vector<Datum>* holdout = nullptr,
                              std::vector<AugmentedParams>* trajectory = nullptr);

/// Same loop with the single-ascent-step perturbation instead of the oracle.
TrainResult train_spgda(const ModelSpec& spec, const RegularizerSpec& reg,
                        const RobustConfig& rcfg, const TrainConfig& tcfg,
                        const std::vector<Datum>& data,
                        const std::vector<Datum>* holdout = nullptr,
                        std::vector<AugmentedParams>* trajectory = nullptr);

/// Non-robust baseline: proximal SGD (or Adam) on the empirical loss.
ErmResult train_erm(const ModelSpec& spec, const RegularizerSpec& reg,
                    const TrainConfig& tcfg, const std::vector<Datum>& data,
                    const std::vector<Datum>* holdout = nullptr,
                    std::vector<Vec>* trajectory = nullptr);

/**
 * Norm of the prox-gradient mapping ||(thetabar - prox(thetabar - alpha*g))/alpha||
 * with g the oracle-based envelope gradient averaged over probe_batch.
 * Zero exactly when thetabar is a fixed point of the prox-gradient map on
 * this batch.
 */
double gradient_mapping_norm(const ModelSpec& spec, const RegularizerSpec& reg,
                             const RobustConfig& rcfg, const AugmentedParams& aug,
                             const std::vector<Datum>& probe_batch, double alpha);

std::string to_string(Algorithm a);

}  // namespace dro
