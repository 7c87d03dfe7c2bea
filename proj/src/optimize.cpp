#include "dro/optimize.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

namespace dro {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void validate_train_config(const TrainConfig& tcfg) {
  if (tcfg.alpha <= 0.0) throw std::invalid_argument("TrainConfig: alpha must be positive");
  if (tcfg.batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (tcfg.eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
}

void validate_robust_config(const RobustConfig& rcfg) {
  if (rcfg.rho <= 0.0) throw std::invalid_argument("RobustConfig: rho must be positive");
  if (rcfg.gamma0 <= 0.0) throw std::invalid_argument("RobustConfig: gamma0 must be positive");
  if (rcfg.eta < 0.0) throw std::invalid_argument("RobustConfig: eta must be >= 0");
  if (rcfg.oracle_eps <= 0.0) {
    throw std::invalid_argument("RobustConfig: oracle_eps must be positive");
  }
}

std::vector<Datum> gather(const std::vector<Datum>& data, const std::vector<std::size_t>& idx) {
  std::vector<Datum> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

void check_gradient_finite(const Vec& g, double g_gamma, std::size_t iteration) {
  if (!all_finite(g) || !std::isfinite(g_gamma)) {
    double worst = 0.0;
    for (double v : g) {
      if (std::isfinite(v)) worst = std::max(worst, std::abs(v));
    }
    throw std::runtime_error("training aborted: non-finite gradient at iteration " +
                             std::to_string(iteration) +
                             " (largest finite coordinate " + std::to_string(worst) + ")");
  }
}

double erm_gradient_mapping(const ModelSpec& spec, const RegularizerSpec& reg,
                            const ModelParams& params, const std::vector<Datum>& batch,
                            double alpha) {
  const Vec g = grad_params(spec, params, batch);
  Vec v(params.flat.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = params.flat[i] - alpha * g[i];
  const Vec p = prox_theta(reg, v, alpha);
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = (params.flat[i] - p[i]) / alpha;
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Shared loop body for the two robust trainers.
TrainResult run_robust_loop(const ModelSpec& spec, const RegularizerSpec& reg,
                            const RobustConfig& rcfg, const TrainConfig& tcfg,
                            const std::vector<Datum>& data, const std::vector<Datum>* holdout,
                            std::vector<AugmentedParams>* trajectory, InnerMethod method) {
  validate_train_config(tcfg);
  validate_robust_config(rcfg);
  if (data.empty()) throw std::invalid_argument("train: empty dataset");

  const auto t0 = Clock::now();
  SeededRng init_rng = param_init_rng(tcfg.seed);
  SeededRng batch_rng = sample_stream_rng(tcfg.seed, 0);

  TrainResult result;
  result.params.theta = init_params(spec, init_rng);
  result.params.gamma = initial_gamma(rcfg);

  for (std::size_t t = 0; t < tcfg.iterations; ++t) {
    const auto idx = draw_batch_indices(batch_rng, data.size(), tcfg.batch_size);
    const auto batch = gather(data, idx);

    RobustBatchGrad g;
    try {
      g = robust_batch_gradient(spec, result.params, rcfg, batch, method);
    } catch (const oracle_error& e) {
      throw oracle_error("iteration " + std::to_string(t) + ": " + e.what(),
                         e.residual_certificate);
    }
    check_gradient_finite(g.g_theta, g.g_gamma, t);

    AugmentedParams pre;
    pre.theta.flat.resize(result.params.theta.flat.size());
    for (std::size_t i = 0; i < pre.theta.flat.size(); ++i) {
      pre.theta.flat[i] = result.params.theta.flat[i] - tcfg.alpha * g.g_theta[i];
    }
    pre.gamma = result.params.gamma - tcfg.alpha * g.g_gamma;
    result.params = prox_step(reg, pre, tcfg.alpha, rcfg.gamma0);

    if (trajectory) trajectory->push_back(result.params);

    const std::size_t it = t + 1;
    if (it % tcfg.eval_every == 0 || it == tcfg.iterations) {
      MetricsRecord rec;
      rec.iteration = it;
      rec.train_loss = g.mean_psi;
      rec.misclass_rate = holdout && !holdout->empty()
                              ? misclassification_rate(spec, result.params.theta, *holdout)
                              : std::nan("");
      rec.grad_map_norm =
          gradient_mapping_norm(spec, reg, rcfg, result.params, batch, tcfg.alpha);
      rec.oracle_iters_mean =
          method == InnerMethod::Oracle ? g.mean_oracle_iters : std::nan("");
      rec.wall_ms = elapsed_ms(t0);
      result.metrics.records.push_back(rec);
    }
  }
  return result;
}

}  // namespace

std::vector<std::size_t> draw_batch_indices(SeededRng& rng, std::size_t n, std::size_t m) {
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = rng.uniform_index(n);
  return idx;
}

RobustBatchGrad robust_batch_gradient(const ModelSpec& spec, const AugmentedParams& aug,
                                      const RobustConfig& rcfg,
                                      const std::vector<Datum>& batch, InnerMethod method) {
  if (batch.empty()) throw std::invalid_argument("robust_batch_gradient: empty batch");
  RobustBatchGrad out;
  out.g_theta.assign(aug.theta.flat.size(), 0.0);
  for (const Datum& z : batch) {
    const PerturbedDatum pert = method == InnerMethod::Oracle
                                    ? inner_max_oracle(spec, aug, z, rcfg)
                                    : inner_single_ascent(spec, aug, z, rcfg);
    const GradientPair gp = danskin_gradient(spec, aug, pert, rcfg);
    for (std::size_t i = 0; i < out.g_theta.size(); ++i) out.g_theta[i] += gp.d_theta[i];
    out.g_gamma += gp.d_gamma;
    out.mean_psi += pert.psi_value;
    out.mean_oracle_iters += static_cast<double>(pert.iterations);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : out.g_theta) v *= inv;
  out.g_gamma *= inv;
  out.mean_psi *= inv;
  out.mean_oracle_iters *= inv;
  return out;
}

TrainResult train_spgd_oracle(const ModelSpec& spec, const RegularizerSpec& reg,
                              const RobustConfig& rcfg, const TrainConfig& tcfg,
                              const std::vector<Datum>& data,
                              const std::vector<Datum>* holdout,
                              std::vector<AugmentedParams>* trajectory) {
  return run_robust_loop(spec, reg, rcfg, tcfg, data, holdout, trajectory,
                         InnerMethod::Oracle);
}

TrainResult train_spgda(const ModelSpec& spec, const RegularizerSpec& reg,
                        const RobustConfig& rcfg, const TrainConfig& tcfg,
                        const std::vector<Datum>& data, const std::vector<Datum>* holdout,
                        std::vector<AugmentedParams>* trajectory) {
  return run_robust_loop(spec, reg, rcfg, tcfg, data, holdout, trajectory,
                         InnerMethod::SingleAscent);
}

ErmResult train_erm(const ModelSpec& spec, const RegularizerSpec& reg, const TrainConfig& tcfg,
                    const std::vector<Datum>& data, const std::vector<Datum>* holdout,
                    std::vector<Vec>* trajectory) {
  validate_train_config(tcfg);
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const bool adam = tcfg.algorithm == Algorithm::ErmAdam;

  const auto t0 = Clock::now();
  SeededRng init_rng = param_init_rng(tcfg.seed);
  SeededRng batch_rng = sample_stream_rng(tcfg.seed, 0);

  ErmResult result;
  result.params = init_params(spec, init_rng);

  Vec m, v;
  if (adam) {
    m.assign(result.params.flat.size(), 0.0);
    v.assign(result.params.flat.size(), 0.0);
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  for (std::size_t t = 0; t < tcfg.iterations; ++t) {
    const auto idx = draw_batch_indices(batch_rng, data.size(), tcfg.batch_size);
    const auto batch = gather(data, idx);

    Vec g(result.params.flat.size(), 0.0);
    double loss_acc = 0.0;
    for (const Datum& z : batch) {
      const Vec gz = grad_params_single(spec, result.params, z);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gz[i];
      loss_acc += loss(spec, result.params, z);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& x : g) x *= inv;
    loss_acc *= inv;
    check_gradient_finite(g, 0.0, t);

    Vec pre(result.params.flat.size());
    if (adam) {
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t + 1));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t + 1));
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        pre[i] = result.params.flat[i] - tcfg.alpha * mhat / (std::sqrt(vhat) + kAdamEps);
      }
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) {
        pre[i] = result.params.flat[i] - tcfg.alpha * g[i];
      }
    }
    result.params.flat = prox_theta(reg, pre, tcfg.alpha);

    if (trajectory) trajectory->push_back(result.params.flat);

    const std::size_t it = t + 1;
    if (it % tcfg.eval_every == 0 || it == tcfg.iterations) {
      MetricsRecord rec;
      rec.iteration = it;
      rec.train_loss = loss_acc;
      rec.misclass_rate = holdout && !holdout->empty()
                              ? misclassification_rate(spec, result.params, *holdout)
                              : std::nan("");
      rec.grad_map_norm = erm_gradient_mapping(spec, reg, result.params, batch, tcfg.alpha);
      rec.oracle_iters_mean = std::nan("");
      rec.wall_ms = elapsed_ms(t0);
      result.metrics.records.push_back(rec);
    }
  }
  return result;
}

double gradient_mapping_norm(const ModelSpec& spec, const RegularizerSpec& reg,
                             const RobustConfig& rcfg, const AugmentedParams& aug,
                             const std::vector<Datum>& probe_batch, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("gradient_mapping_norm: alpha must be positive");
  if (probe_batch.empty()) {
    throw std::invalid_argument("gradient_mapping_norm: empty probe batch");
  }
  const RobustBatchGrad g =
      robust_batch_gradient(spec, aug, rcfg, probe_batch, InnerMethod::Oracle);
  AugmentedParams pre;
  pre.theta.flat.resize(aug.theta.flat.size());
  for (std::size_t i = 0; i < pre.theta.flat.size(); ++i) {
    pre.theta.flat[i] = aug.theta.flat[i] - alpha * g.g_theta[i];
  }
  pre.gamma = aug.gamma - alpha * g.g_gamma;
  const AugmentedParams p = prox_step(reg, pre, alpha, rcfg.gamma0);
  double acc = 0.0;
  for (std::size_t i = 0; i < pre.theta.flat.size(); ++i) {
    const double d = (aug.theta.flat[i] - p.theta.flat[i]) / alpha;
    acc += d * d;
  }
  const double dg = (aug.gamma - p.gamma) / alpha;
  acc += dg * dg;
  return std::sqrt(acc);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(const RunMetrics& metrics, std::ostream& out) {
  out << "iteration,train_loss,misclass_rate,grad_map_norm,oracle_iters_mean\n";
  for (const MetricsRecord& r : metrics.records) {
    out << r.iteration << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.misclass_rate)
        << ',' << fmt_double(r.grad_map_norm) << ',' << fmt_double(r.oracle_iters_mean) << '\n';
  }
}

void write_json(const RunMetrics& metrics, std::ostream& out) {
  nlohmann::ordered_json root;
  root["records"] = nlohmann::ordered_json::array();
  for (const MetricsRecord& r : metrics.records) {
    nlohmann::ordered_json rec;
    rec["iteration"] = r.iteration;
    rec["train_loss"] = r.train_loss;
    rec["misclass_rate"] = r.misclass_rate;
    rec["grad_map_norm"] = r.grad_map_norm;
    rec["oracle_iters_mean"] = r.oracle_iters_mean;
    rec["wall_ms"] = r.wall_ms;
    root["records"].push_back(rec);
  }
  out << root.dump(2) << '\n';
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::SpgdOracle:
      return "spgd-oracle";
    case Algorithm::Spgda:
      return "spgda";
    case Algorithm::ErmSgd:
      return "erm-sgd";
    case Algorithm::ErmAdam:
      return "erm-adam";
  }
  return "?";
}

}  // namespace dro
