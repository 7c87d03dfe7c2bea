#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dro/attack.hpp"
#include "dro/data.hpp"
#include "dro/federated.hpp"
#include "dro/model.hpp"
#include "dro/optimize.hpp"

namespace dro {

/**
 * Run manifests are single key-table text files: `key = value` lines
 * grouped under `[section]` / `[section.sub]` headers, values being
 * numbers, quoted strings, booleans, or flat arrays thereof. `#` starts
 * a comment. Keys are exposed flattened ("trainer.erm.alpha").
 */
using ManifestValue =
    std::variant<double, std::string, bool, std::vector<double>, std::vector<std::string>>;

struct ManifestFile {
  std::map<std::string, ManifestValue> values;
  std::string raw;           // original bytes, hashed for the repro record
  std::string path;

  bool has(const std::string& key) const { return values.count(key) > 0; }
};

/// Parses the key-table format; throws parse_error with a line number on
/// malformed input.
ManifestFile parse_manifest_file(const std::string& path);

struct DatasetSection {
  std::string source;           // image-blobs | two-gaussians | separable-2pt | idx | csv
  std::size_t train_n = 0;
  std::size_t test_n = 0;
  std::uint64_t seed = 0;
  std::size_t dim = 2;          // synthetic kinds
  double separation = 1.0;
  std::string images_path, labels_path;  // idx
  std::string path, label_column;        // csv
};

struct TrainerEntry {
  std::string name;
  TrainConfig train;
  RobustConfig robust;
  RegularizerSpec reg;
};

struct AttackGrid {
  std::vector<AttackKind> kinds;
  std::vector<double> eps_grid;
  std::size_t steps = 10;
  double step_size = 1.0;
  double wrm_gamma = 1.0;
};

struct FederationSection {
  std::vector<FedAlgorithm> algorithms;
  FederationConfig base;
  std::optional<AttackSpec> eval_attack;  // per-round attacked-error curve
};

struct RunManifest {
  std::string name;
  std::string output_dir;
  DatasetSection dataset;
  ModelSpec model;
  std::vector<TrainerEntry> trainers;
  std::optional<AttackGrid> attacks;
  std::optional<FederationSection> federation;
};

/// Assembles the typed manifest, appending one diagnostic per violation
/// (field paths included). The result is only meaningful when diags
/// stays empty.
RunManifest assemble_manifest(const ManifestFile& file, std::vector<std::string>& diags);

/// All structural and range violations at once; empty means valid.
std::vector<std::string> validate_manifest(const std::string& path);

/**
 * Executes the manifest: trains and checkpoints every trainer, sweeps the
 * attack grid into a curve file, runs the federation section, and writes
 * the reproducibility record. All outputs land under the output directory
 * (override argument, else DRO_OUTPUT_DIR, else the manifest's value).
 * Returns 0 on success.
 */
int run_manifest(const std::string& path, const std::string& output_override = "");

/// Evaluates a saved checkpoint under the manifest's attack grid.
int attack_eval(const std::string& checkpoint_path, const std::string& manifest_path,
                const std::string& output_override = "");

/// FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace dro
