#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "dro/data.hpp"
#include "dro/optimize.hpp"
#include "dro/prox.hpp"
#include "dro/robust.hpp"

namespace dro {

enum class FedAlgorithm { Drfl, FedAvg };
enum class PartitionMode { Iid, SingleClass };

class protocol_error : public std::runtime_error {
 public:
  explicit protocol_error(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Deterministic in-process federation. Workers and the server exchange
 * explicit message values; worker k's sampling stream is seeded with
 * train.seed ^ k, so the whole simulation is reproducible and a
 * one-worker run reproduces the centralized SPGDA trajectory exactly.
 * v1 supports full participation only.
 */
struct FederationConfig {
  std::size_t num_workers = 10;
  std::size_t rounds = 50;
  std::size_t local_batch = 64;
  PartitionMode partition = PartitionMode::Iid;
  double participation = 1.0;
  FedAlgorithm algorithm = FedAlgorithm::Drfl;
  std::size_t fedavg_local_epochs = 1;
  RobustConfig robust;
  TrainConfig train;   // alpha / seed / eval cadence for the outer loop
  RegularizerSpec reg;
};

/// Server -> workers: the round's shared iterate.
struct BroadcastMsg {
  std::size_t round = 0;
  AugmentedParams aug;
};

/// Worker -> server: minibatch-averaged envelope gradient.
struct GradientMsg {
  std::size_t round = 0;
  std::size_t worker_id = 0;
  GradientPair grad;
  std::size_t batch_size_used = 0;
};

struct WorkerState {
  std::size_t worker_id = 0;
  std::vector<Datum> shard;
  SeededRng rng;
};

/**
 * Splits a dataset into K disjoint shards covering it.
 *  - iid: seeded shuffle then equal split (K=1 returns the dataset in its
 *    original order).
 *  - single-class: class c goes to worker c mod K; with more workers than
 *    classes, the workers sharing class k mod num_classes split that
 *    class's samples. Errors if any class is empty or any shard would be.
 */
std::vector<std::vector<Datum>> partition(const Dataset& data, std::size_t K,
                                          PartitionMode mode, std::uint64_t seed);

/// One DRFL worker step: sample a minibatch, perturb each sample by a
/// single ascent step at the broadcast iterate, return the averaged
/// gradient pair.
GradientMsg worker_round(WorkerState& state, const BroadcastMsg& msg, const ModelSpec& spec,
                         const FederationConfig& cfg);

/// One DRFL server step: check one message per worker on the same round,
/// average with uniform 1/K weights in worker-id order, prox update.
AugmentedParams server_round(const AugmentedParams& aug, const std::vector<GradientMsg>& msgs,
                             const FederationConfig& cfg);

using RoundCallback = std::function<void(std::size_t round, const AugmentedParams&)>;

/// Full simulation: T rounds of broadcast -> worker_round x K ->
/// server_round (or the federated-averaging baseline). Metrics are
/// recorded once per round; on_round, when set, observes every post-update
/// iterate.
TrainResult run_federation(const FederationConfig& cfg, const Dataset& data,
                           const ModelSpec& spec,
                           const std::vector<Datum>* holdout = nullptr,
                           std::vector<AugmentedParams>* trajectory = nullptr,
                           const RoundCallback& on_round = nullptr);

/**
 * Flat little-endian wire format for the two message types:
 *   broadcast: "DROBCST1" | u64 round | u64 len | len x f64 theta | f64 gamma
 *   gradient:  "DROGRAD1" | u64 round | u64 worker | u64 batch | u64 len
 *              | len x f64 d_theta | f64 d_gamma
 */
void write_broadcast(std::ostream& out, const BroadcastMsg& msg);
BroadcastMsg read_broadcast(std::istream& in);
void write_gradient(std::ostream& out, const GradientMsg& msg);
GradientMsg read_gradient(std::istream& in);

std::string to_string(FedAlgorithm a);
std::string to_string(PartitionMode m);

}  // namespace dro
