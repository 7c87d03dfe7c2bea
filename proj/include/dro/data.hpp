#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dro/model.hpp"
#include "dro/tensor.hpp"

namespace dro {

class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

/// Immutable sample container; features are normalized to [-1, 1] by
/// every ingestion path and labels lie in [0, num_classes).
struct Dataset {
  std::vector<Datum> items;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::string provenance;
};

enum class SyntheticKind { TwoGaussians, Separable2pt, ImageBlobs };

/**
 * Seeded synthetic dataset descriptions.
 *  - two-gaussians: two classes at +/- separation*e1 with unit isotropic
 *    noise, then min-max normalized per column.
 *  - separable-2pt: two fixed points at +/- separation*e1 (clamped to the
 *    feature box), replicated to n samples.
 *  - image-blobs: 10-class 28x28 "digit-like" grayscale images built from
 *    class-specific Gaussian blob layouts with per-sample jitter; a desk
 *    stand-in for MNIST-shaped data (dim/separation ignored).
 */
struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::TwoGaussians;
  std::size_t n = 100;
  std::size_t dim = 2;
  double separation = 1.0;
  std::uint64_t seed = 0;
};

/// IDX image/label pair loader (big-endian dims, magic 0x803/0x801).
/// Pixels map affinely from [0,255] to [-1,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Exports a dataset as an IDX pair; features map back to [0,255] bytes.
/// Requires a square feature_dim (images are rows x cols).
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

/// CSV with a header row; label_column names the label field. Features are
/// min-max scaled per column to [-1,1] (constant columns map to 0).
Dataset load_csv(const std::string& path, const std::string& label_column);

/// Seeded draw of n items without replacement.
Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed);

/// Seeded shuffle then disjoint (train, test) split.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, std::size_t n_train,
                                             std::size_t n_test, std::uint64_t seed);

Dataset make_synthetic(const SyntheticSpec& spec);

/// Per-column min-max map onto [-1,1]; constant columns map to 0.
/// Idempotent on already-normalized data.
void normalize_minmax(Dataset& ds);

/// Verifies the feature-range and label-range invariants; throws on violation.
void check_invariants(const Dataset& ds);

}  // namespace dro
