#include "dro/federated.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

#include "dro/binio.hpp"

namespace dro {

namespace {

using Clock = std::chrono::steady_clock;

void validate_federation_config(const FederationConfig& cfg) {
  if (cfg.num_workers < 1) throw std::invalid_argument("FederationConfig: K must be >= 1");
  if (cfg.local_batch < 1) {
    throw std::invalid_argument("FederationConfig: local_batch must be >= 1");
  }
  if (cfg.participation != 1.0) {
    throw std::invalid_argument("FederationConfig: only full participation is supported");
  }
  if (cfg.train.alpha <= 0.0) throw std::invalid_argument("FederationConfig: alpha must be > 0");
}

std::vector<Datum> gather(const std::vector<Datum>& data, const std::vector<std::size_t>& idx) {
  std::vector<Datum> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

std::vector<std::vector<Datum>> partition(const Dataset& data, std::size_t K,
                                          PartitionMode mode, std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("partition: K must be >= 1");
  if (data.items.size() < K) throw std::invalid_argument("partition: fewer samples than workers");

  std::vector<std::vector<Datum>> shards(K);
  if (mode == PartitionMode::Iid) {
    if (K == 1) {
      shards[0] = data.items;  // degenerate split keeps the original order
      return shards;
    }
    std::vector<std::size_t> idx(data.items.size());
    std::iota(idx.begin(), idx.end(), 0);
    SeededRng rng(seed);
    rng.shuffle(idx);
    const std::size_t base = data.items.size() / K;
    const std::size_t extra = data.items.size() % K;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t take = base + (k < extra ? 1 : 0);
      for (std::size_t i = 0; i < take; ++i) shards[k].push_back(data.items[idx[pos++]]);
    }
    return shards;
  }

  // single-class: group samples by label first
  const std::size_t C = data.num_classes;
  std::vector<std::vector<Datum>> by_class(C);
  for (const Datum& d : data.items) by_class[static_cast<std::size_t>(d.label())].push_back(d);
  for (std::size_t c = 0; c < C; ++c) {
    if (by_class[c].empty()) {
      throw std::invalid_argument("partition: class " + std::to_string(c) +
                                  " has no samples in single-class mode");
    }
  }
  SeededRng rng(seed);
  if (K <= C) {
    // worker k holds the classes congruent to k mod K
    for (std::size_t c = 0; c < C; ++c) {
      auto& shard = shards[c % K];
      for (Datum& d : by_class[c]) shard.push_back(std::move(d));
    }
  } else {
    // workers sharing class k mod C split that class's samples
    std::vector<std::vector<std::size_t>> owners(C);
    for (std::size_t k = 0; k < K; ++k) owners[k % C].push_back(k);
    for (std::size_t c = 0; c < C; ++c) {
      rng.shuffle(by_class[c]);
      const auto& ow = owners[c];
      for (std::size_t i = 0; i < by_class[c].size(); ++i) {
        shards[ow[i % ow.size()]].push_back(std::move(by_class[c][i]));
      }
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (shards[k].empty()) {
      throw std::invalid_argument("partition: worker " + std::to_string(k) +
                                  " received an empty shard");
    }
  }
  return shards;
}

GradientMsg worker_round(WorkerState& state, const BroadcastMsg& msg, const ModelSpec& spec,
                         const FederationConfig& cfg) {
  if (state.shard.empty()) {
    throw std::invalid_argument("worker_round: worker " + std::to_string(state.worker_id) +
                                " has an empty shard");
  }
  const auto idx = draw_batch_indices(state.rng, state.shard.size(), cfg.local_batch);
  const auto batch = gather(state.shard, idx);
  const RobustBatchGrad g =
      robust_batch_gradient(spec, msg.aug, cfg.robust, batch, InnerMethod::SingleAscent);
  GradientMsg out;
  out.round = msg.round;
  out.worker_id = state.worker_id;
  out.grad.d_theta = g.g_theta;
  out.grad.d_gamma = g.g_gamma;
  out.batch_size_used = batch.size();
  return out;
}

AugmentedParams server_round(const AugmentedParams& aug, const std::vector<GradientMsg>& msgs,
                             const FederationConfig& cfg) {
  const std::size_t K = cfg.num_workers;
  if (msgs.size() != K) {
    throw protocol_error("server_round: expected " + std::to_string(K) + " messages, got " +
                         std::to_string(msgs.size()));
  }
  std::vector<const GradientMsg*> by_worker(K, nullptr);
  for (const GradientMsg& m : msgs) {
    if (m.round != msgs.front().round) {
      throw protocol_error("server_round: worker " + std::to_string(m.worker_id) +
                           " reported round " + std::to_string(m.round) + ", expected " +
                           std::to_string(msgs.front().round));
    }
    if (m.worker_id >= K) {
      throw protocol_error("server_round: unknown worker " + std::to_string(m.worker_id));
    }
    if (by_worker[m.worker_id]) {
      throw protocol_error("server_round: duplicate message from worker " +
                           std::to_string(m.worker_id));
    }
    if (!all_finite(m.grad.d_theta) || !std::isfinite(m.grad.d_gamma)) {
      throw protocol_error("server_round: non-finite gradient from worker " +
                           std::to_string(m.worker_id));
    }
    by_worker[m.worker_id] = &m;
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (!by_worker[k]) {
      throw protocol_error("server_round: missing message from worker " + std::to_string(k));
    }
  }

  // uniform 1/K aggregation in worker-id order
  Vec g_theta(aug.theta.flat.size(), 0.0);
  double g_gamma = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const GradientPair& gp = by_worker[k]->grad;
    if (gp.d_theta.size() != g_theta.size()) {
      throw dimension_error("server_round: gradient length mismatch from worker " +
                            std::to_string(k));
    }
    for (std::size_t i = 0; i < g_theta.size(); ++i) g_theta[i] += gp.d_theta[i];
    g_gamma += gp.d_gamma;
  }
  const double inv = 1.0 / static_cast<double>(K);
  for (double& v : g_theta) v *= inv;
  g_gamma *= inv;

  AugmentedParams pre;
  pre.theta.flat.resize(aug.theta.flat.size());
  for (std::size_t i = 0; i < pre.theta.flat.size(); ++i) {
    pre.theta.flat[i] = aug.theta.flat[i] - cfg.train.alpha * g_theta[i];
  }
  pre.gamma = aug.gamma - cfg.train.alpha * g_gamma;
  return prox_step(cfg.reg, pre, cfg.train.alpha, cfg.robust.gamma0);
}

namespace {

// One local FedAvg epoch: shuffled full minibatches of proximal SGD on the
// plain loss.
ModelParams fedavg_local_update(const ModelSpec& spec, ModelParams params, WorkerState& state,
                                const FederationConfig& cfg) {
  for (std::size_t e = 0; e < cfg.fedavg_local_epochs; ++e) {
    std::vector<std::size_t> order(state.shard.size());
    std::iota(order.begin(), order.end(), 0);
    state.rng.shuffle(order);
    const std::size_t num_batches = std::max<std::size_t>(1, order.size() / cfg.local_batch);
    for (std::size_t b = 0; b < num_batches; ++b) {
      const std::size_t lo = b * cfg.local_batch;
      const std::size_t hi = std::min(order.size(), lo + cfg.local_batch);
      Vec g(params.flat.size(), 0.0);
      for (std::size_t i = lo; i < hi; ++i) {
        const Vec gz = grad_params_single(spec, params, state.shard[order[i]]);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += gz[j];
      }
      const double inv = 1.0 / static_cast<double>(hi - lo);
      Vec pre(params.flat.size());
      for (std::size_t j = 0; j < params.flat.size(); ++j) {
        pre[j] = params.flat[j] - cfg.train.alpha * g[j] * inv;
      }
      params.flat = prox_theta(cfg.reg, pre, cfg.train.alpha);
    }
  }
  return params;
}

}  // namespace

TrainResult run_federation(const FederationConfig& cfg, const Dataset& data,
                           const ModelSpec& spec, const std::vector<Datum>* holdout,
                           std::vector<AugmentedParams>* trajectory,
                           const RoundCallback& on_round) {
  validate_federation_config(cfg);
  const auto t0 = Clock::now();

  const auto shards = partition(data, cfg.num_workers, cfg.partition, cfg.train.seed);
  std::vector<WorkerState> workers;
  workers.reserve(cfg.num_workers);
  for (std::size_t k = 0; k < cfg.num_workers; ++k) {
    workers.push_back(WorkerState{k, shards[k], sample_stream_rng(cfg.train.seed, k)});
  }

  SeededRng init_rng = param_init_rng(cfg.train.seed);
  TrainResult result;
  result.params.theta = init_params(spec, init_rng);
  result.params.gamma = initial_gamma(cfg.robust);

  // fixed probe for the per-round training-loss estimate
  const std::size_t probe_n = std::min<std::size_t>(256, data.items.size());
  std::vector<Datum> probe(data.items.begin(),
                           data.items.begin() + static_cast<std::ptrdiff_t>(probe_n));

  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    if (cfg.algorithm == FedAlgorithm::Drfl) {
      const BroadcastMsg bc{round, result.params};
      std::vector<GradientMsg> msgs;
      msgs.reserve(cfg.num_workers);
      for (auto& w : workers) msgs.push_back(worker_round(w, bc, spec, cfg));
      result.params = server_round(result.params, msgs, cfg);
    } else {
      std::vector<ModelParams> locals;
      locals.reserve(cfg.num_workers);
      for (auto& w : workers) {
        locals.push_back(fedavg_local_update(spec, result.params.theta, w, cfg));
      }
      Vec avg(result.params.theta.flat.size(), 0.0);
      for (const ModelParams& p : locals) {
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += p.flat[i];
      }
      const double inv = 1.0 / static_cast<double>(cfg.num_workers);
      for (double& v : avg) v *= inv;
      result.params.theta.flat = std::move(avg);
    }

    if (trajectory) trajectory->push_back(result.params);
    if (on_round) on_round(round, result.params);

    MetricsRecord rec;
    rec.iteration = round;
    double loss_acc = 0.0;
    for (const Datum& z : probe) loss_acc += loss(spec, result.params.theta, z);
    rec.train_loss = loss_acc / static_cast<double>(probe.size());
    rec.misclass_rate = holdout && !holdout->empty()
                            ? misclassification_rate(spec, result.params.theta, *holdout)
                            : std::nan("");
    rec.grad_map_norm = std::nan("");
    rec.oracle_iters_mean = std::nan("");
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    result.metrics.records.push_back(rec);
  }
  return result;
}

namespace {

constexpr char kBroadcastMagic[8] = {'D', 'R', 'O', 'B', 'C', 'S', 'T', '1'};
constexpr char kGradientMagic[8] = {'D', 'R', 'O', 'G', 'R', 'A', 'D', '1'};

void check_magic(std::istream& in, const char (&magic)[8], const char* what) {
  char buf[8];
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0) {
    throw std::runtime_error(std::string("bad magic reading ") + what);
  }
}

}  // namespace

void write_broadcast(std::ostream& out, const BroadcastMsg& msg) {
  out.write(kBroadcastMagic, 8);
  binio::write_u64(out, msg.round);
  binio::write_u64(out, msg.aug.theta.flat.size());
  for (double v : msg.aug.theta.flat) binio::write_f64(out, v);
  binio::write_f64(out, msg.aug.gamma);
}

BroadcastMsg read_broadcast(std::istream& in) {
  check_magic(in, kBroadcastMagic, "broadcast message");
  BroadcastMsg msg;
  msg.round = binio::read_u64(in, "broadcast round");
  const std::uint64_t n = binio::read_u64(in, "broadcast length");
  msg.aug.theta.flat.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    msg.aug.theta.flat[i] = binio::read_f64(in, "broadcast theta");
  }
  msg.aug.gamma = binio::read_f64(in, "broadcast gamma");
  return msg;
}

void write_gradient(std::ostream& out, const GradientMsg& msg) {
  out.write(kGradientMagic, 8);
  binio::write_u64(out, msg.round);
  binio::write_u64(out, msg.worker_id);
  binio::write_u64(out, msg.batch_size_used);
  binio::write_u64(out, msg.grad.d_theta.size());
  for (double v : msg.grad.d_theta) binio::write_f64(out, v);
  binio::write_f64(out, msg.grad.d_gamma);
}

GradientMsg read_gradient(std::istream& in) {
  check_magic(in, kGradientMagic, "gradient message");
  GradientMsg msg;
  msg.round = binio::read_u64(in, "gradient round");
  msg.worker_id = binio::read_u64(in, "gradient worker");
  msg.batch_size_used = binio::read_u64(in, "gradient batch size");
  const std::uint64_t n = binio::read_u64(in, "gradient length");
  msg.grad.d_theta.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) msg.grad.d_theta[i] = binio::read_f64(in, "d_theta");
  msg.grad.d_gamma = binio::read_f64(in, "d_gamma");
  return msg;
}

std::string to_string(FedAlgorithm a) {
  return a == FedAlgorithm::Drfl ? "drfl" : "fedavg";
}

std::string to_string(PartitionMode m) {
  return m == PartitionMode::Iid ? "iid" : "single-class";
}

}  // namespace dro
