#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dro/tensor.hpp"

namespace dro {

/// LinearScore is a synthetic benchmark loss l(theta; z) = w'x + b that is
/// linear in both the parameters and the input; the robust-objective
/// machinery is validated against its closed-form inner maximizer. The
/// other kinds are the user-facing models.
enum class ModelKind { LinearRegression, Logistic, Mlp, LinearScore };
enum class Activation { Relu, Softplus, Tanh };

/**
 * Immutable description of a differentiable predictive model.
 *
 * output_dim is the number of classes for classifiers and 1 for
 * linear regression. l1_weight/l2_weight describe the regularizer
 * attached to this model; they are *not* folded into loss() or the
 * gradients, which cover the data term only (the regularizer is
 * applied through the proximal operator).
 */
struct ModelSpec {
  ModelKind kind = ModelKind::Logistic;
  std::size_t input_dim = 0;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden_dims;  // mlp only
  Activation activation = Activation::Softplus;
  double l2_weight = 0.0;
  double l1_weight = 0.0;
};

/**
 * Flat parameter vector in the canonical layout: layers in forward
 * order, each layer's weight matrix (row-major, out x in) followed by
 * its bias vector. Linear regression and logistic models are a single
 * layer; MLPs stack input->hidden...->output.
 */
struct ModelParams {
  Vec flat;
};

/// One training/test sample. y holds the class index for classifiers
/// (stored as a double) or the real regression target.
struct Datum {
  Vec x;
  double y = 0.0;

  int label() const { return static_cast<int>(y); }
};

/// Throws std::invalid_argument if the spec is malformed.
void validate_spec(const ModelSpec& spec);

/// (in, out) sizes of every layer implied by the spec.
std::vector<std::pair<std::size_t, std::size_t>> layer_dims(const ModelSpec& spec);

std::size_t param_count(const ModelSpec& spec);

/// FNV-1a hash of the canonical spec description; stored in checkpoints.
std::uint64_t spec_hash(const ModelSpec& spec);

/// Seeded uniform init in [-0.05, 0.05] for every coordinate.
ModelParams init_params(const ModelSpec& spec, SeededRng& rng);

/// Data-term loss l(theta; z): softmax cross-entropy for classifiers,
/// squared error for linear regression. Excludes the regularizer.
double loss(const ModelSpec& spec, const ModelParams& params, const Datum& z);

/// Gradient of loss w.r.t. the flat parameters for a single sample.
Vec grad_params_single(const ModelSpec& spec, const ModelParams& params, const Datum& z);

/// Batch-mean parameter gradient; batch must be non-empty.
Vec grad_params(const ModelSpec& spec, const ModelParams& params,
                const std::vector<Datum>& batch);

/// Gradient of loss w.r.t. the input features x.
Vec grad_input(const ModelSpec& spec, const ModelParams& params, const Datum& z);

/// Class scores (logits) for classifiers, 1-vector prediction for regression.
Vec scores(const ModelSpec& spec, const ModelParams& params, const Vec& x);

/// Argmax class with ties broken toward the lowest index. Classifiers only.
int predict_class(const ModelSpec& spec, const ModelParams& params, const Vec& x);

/// Regression prediction (linear-regression models only).
double predict_value(const ModelSpec& spec, const ModelParams& params, const Vec& x);

/// Fraction misclassified; data must be non-empty.
double misclassification_rate(const ModelSpec& spec, const ModelParams& params,
                              const std::vector<Datum>& data);

/**
 * Checkpoint layout (little-endian):
 *   bytes 0..7   magic "DROMP001"
 *   bytes 8..15  u64 spec hash
 *   bytes 16..23 u64 parameter count
 *   then count x f64 parameters in canonical layout.
 */
void save_checkpoint(const ModelSpec& spec, const ModelParams& params, std::ostream& out);
ModelParams load_checkpoint(const ModelSpec& spec, std::istream& in);
void save_checkpoint_file(const ModelSpec& spec, const ModelParams& params,
                          const std::string& path);
ModelParams load_checkpoint_file(const ModelSpec& spec, const std::string& path);

std::string to_string(ModelKind kind);
std::string to_string(Activation act);

}  // namespace dro
