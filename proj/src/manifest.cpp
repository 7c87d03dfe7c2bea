#include "dro/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace dro {

namespace fs = std::filesystem;

namespace {

constexpr const char* kLibraryVersion = "drotrain 0.1.0";

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quotes = !in_quotes;
    if (line[i] == '#' && !in_quotes) return line.substr(0, i);
  }
  return line;
}

double parse_number_strict(const std::string& s, std::size_t line_no, const std::string& path) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || (end && trim(end) != "")) {
    throw parse_error(path + ":" + std::to_string(line_no) + ": expected a number, got '" + s +
                      "'");
  }
  return v;
}

std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (char c : s) {
    if (c == '"') in_quotes = !in_quotes;
    if (c == ',' && !in_quotes) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

ManifestValue parse_value(const std::string& raw, std::size_t line_no, const std::string& path) {
  const std::string s = trim(raw);
  if (s.empty()) throw parse_error(path + ":" + std::to_string(line_no) + ": empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') {
      throw parse_error(path + ":" + std::to_string(line_no) + ": unterminated string");
    }
    return s.substr(1, s.size() - 2);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') {
      throw parse_error(path + ":" + std::to_string(line_no) + ": unterminated array");
    }
    const auto parts = split_top_level(s.substr(1, s.size() - 2));
    if (parts.empty()) return std::vector<double>{};
    if (parts.front().size() && parts.front().front() == '"') {
      std::vector<std::string> items;
      for (const auto& p : parts) {
        if (p.size() < 2 || p.front() != '"' || p.back() != '"') {
          throw parse_error(path + ":" + std::to_string(line_no) + ": bad string array element '" +
                            p + "'");
        }
        items.push_back(p.substr(1, p.size() - 2));
      }
      return items;
    }
    std::vector<double> items;
    for (const auto& p : parts) items.push_back(parse_number_strict(p, line_no, path));
    return items;
  }
  return parse_number_strict(s, line_no, path);
}

}  // namespace

ManifestFile parse_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open manifest: " + path);
  ManifestFile mf;
  mf.path = path;
  {
    std::ostringstream raw;
    raw << in.rdbuf();
    mf.raw = raw.str();
  }
  std::istringstream stream(mf.raw);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw parse_error(path + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (mf.values.count(full)) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": duplicate key '" + full + "'");
    }
    mf.values[full] = parse_value(line.substr(eq + 1), line_no, path);
  }
  return mf;
}

namespace {

// Typed access over the flat key map; every shape problem becomes one
// diagnostic naming the field path.
struct Reader {
  const ManifestFile& f;
  std::vector<std::string>& diags;

  bool has(const std::string& key) const { return f.has(key); }

  std::optional<double> number(const std::string& key) const {
    auto it = f.values.find(key);
    if (it == f.values.end()) return std::nullopt;
    if (const double* v = std::get_if<double>(&it->second)) return *v;
    diags.push_back(key + ": expected a number");
    return std::nullopt;
  }

  double number_or(const std::string& key, double def) const {
    return number(key).value_or(def);
  }

  double require_number(const std::string& key) const {
    auto v = number(key);
    if (!v && !f.has(key)) diags.push_back(key + ": required");
    return v.value_or(0.0);
  }

  std::optional<std::string> str(const std::string& key) const {
    auto it = f.values.find(key);
    if (it == f.values.end()) return std::nullopt;
    if (const std::string* v = std::get_if<std::string>(&it->second)) return *v;
    diags.push_back(key + ": expected a string");
    return std::nullopt;
  }

  std::string str_or(const std::string& key, const std::string& def) const {
    return str(key).value_or(def);
  }

  std::string require_str(const std::string& key) const {
    auto v = str(key);
    if (!v && !f.has(key)) diags.push_back(key + ": required");
    return v.value_or("");
  }

  bool bool_or(const std::string& key, bool def) const {
    auto it = f.values.find(key);
    if (it == f.values.end()) return def;
    if (const bool* v = std::get_if<bool>(&it->second)) return *v;
    diags.push_back(key + ": expected true/false");
    return def;
  }

  std::vector<double> num_list(const std::string& key) const {
    auto it = f.values.find(key);
    if (it == f.values.end()) return {};
    if (const auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
    diags.push_back(key + ": expected a number array");
    return {};
  }

  std::vector<std::string> str_list(const std::string& key) const {
    auto it = f.values.find(key);
    if (it == f.values.end()) return {};
    if (const auto* v = std::get_if<std::vector<std::string>>(&it->second)) return *v;
    if (const auto* empty = std::get_if<std::vector<double>>(&it->second)) {
      if (empty->empty()) return {};
    }
    diags.push_back(key + ": expected a string array");
    return {};
  }
};

std::optional<Algorithm> parse_algorithm(const std::string& s) {
  if (s == "spgd-oracle") return Algorithm::SpgdOracle;
  if (s == "spgda") return Algorithm::Spgda;
  if (s == "erm-sgd") return Algorithm::ErmSgd;
  if (s == "erm-adam") return Algorithm::ErmAdam;
  return std::nullopt;
}

std::optional<AttackKind> parse_attack_kind(const std::string& s) {
  if (s == "fgsm") return AttackKind::Fgsm;
  if (s == "ifgsm") return AttackKind::Ifgsm;
  if (s == "pgd") return AttackKind::Pgd;
  if (s == "wrm") return AttackKind::Wrm;
  return std::nullopt;
}

ModelSpec read_model(const Reader& r, std::vector<std::string>& diags) {
  ModelSpec spec;
  const std::string kind = r.str_or("model.kind", "logistic");
  if (kind == "linear-regression") {
    spec.kind = ModelKind::LinearRegression;
  } else if (kind == "logistic") {
    spec.kind = ModelKind::Logistic;
  } else if (kind == "mlp") {
    spec.kind = ModelKind::Mlp;
  } else {
    diags.push_back("model.kind: unknown kind '" + kind + "'");
  }
  spec.input_dim = static_cast<std::size_t>(r.require_number("model.input_dim"));
  spec.output_dim = static_cast<std::size_t>(
      r.number_or("model.classes", spec.kind == ModelKind::LinearRegression ? 1 : 2));
  for (double h : r.num_list("model.hidden_dims")) {
    spec.hidden_dims.push_back(static_cast<std::size_t>(h));
  }
  const std::string act = r.str_or("model.activation", "softplus");
  if (act == "relu") {
    spec.activation = Activation::Relu;
  } else if (act == "softplus") {
    spec.activation = Activation::Softplus;
  } else if (act == "tanh") {
    spec.activation = Activation::Tanh;
  } else {
    diags.push_back("model.activation: unknown activation '" + act + "'");
  }
  spec.l1_weight = r.number_or("model.l1_weight", 0.0);
  spec.l2_weight = r.number_or("model.l2_weight", 0.0);
  try {
    validate_spec(spec);
  } catch (const std::exception& e) {
    diags.push_back(std::string("model: ") + e.what());
  }
  return spec;
}

RegularizerSpec read_reg(const Reader& r, const std::string& prefix,
                         std::vector<std::string>& diags) {
  RegularizerSpec reg;
  const std::string kind = r.str_or(prefix + "reg_kind", "none");
  if (kind == "none") {
    reg.kind = RegKind::None;
  } else if (kind == "l1") {
    reg.kind = RegKind::L1;
  } else if (kind == "l2sq") {
    reg.kind = RegKind::L2Sq;
  } else {
    diags.push_back(prefix + "reg_kind: unknown kind '" + kind + "'");
  }
  reg.weight = r.number_or(prefix + "reg_weight", 0.0);
  if (reg.weight < 0.0) diags.push_back(prefix + "reg_weight: must be >= 0");
  return reg;
}

RobustConfig read_robust(const Reader& r, const std::string& prefix,
                         std::vector<std::string>& diags) {
  RobustConfig rc;
  rc.rho = r.number_or(prefix + "rho", 25.0);
  rc.gamma0 = r.number_or(prefix + "gamma0", 1.0);
  rc.eta = r.number_or(prefix + "eta", 0.02);
  rc.oracle_eps = r.number_or(prefix + "oracle_eps", 1e-4);
  rc.oracle_max_iters = static_cast<std::size_t>(r.number_or(prefix + "oracle_max_iters", 1000));
  rc.lzz_estimate = r.number_or(prefix + "lzz_estimate", 0.0);
  rc.box_feasible = r.bool_or(prefix + "box_feasible", false);
  if (rc.rho <= 0.0) diags.push_back(prefix + "rho: must be > 0");
  if (rc.gamma0 <= 0.0) diags.push_back(prefix + "gamma0: must be > 0");
  if (rc.eta < 0.0) diags.push_back(prefix + "eta: must be >= 0");
  if (rc.oracle_eps <= 0.0) diags.push_back(prefix + "oracle_eps: must be > 0");
  if (rc.lzz_estimate < 0.0) diags.push_back(prefix + "lzz_estimate: must be >= 0");
  if (concavity_estimate(rc) <= 0.0) {
    diags.push_back(prefix + "gamma0: 2*gamma0 - lzz_estimate must be positive");
  }
  return rc;
}

TrainConfig read_train(const Reader& r, const std::string& prefix,
                       std::vector<std::string>& diags) {
  TrainConfig tc;
  const std::string alg = r.require_str(prefix + "algorithm");
  if (auto a = parse_algorithm(alg)) {
    tc.algorithm = *a;
  } else if (!alg.empty()) {
    diags.push_back(prefix + "algorithm: unknown algorithm '" + alg + "'");
  }
  tc.alpha = r.number_or(prefix + "alpha", 0.001);
  tc.iterations = static_cast<std::size_t>(r.number_or(prefix + "iterations", 1000));
  tc.batch_size = static_cast<std::size_t>(r.number_or(prefix + "batch_size", 128));
  tc.seed = static_cast<std::uint64_t>(r.number_or(prefix + "seed", 0));
  tc.eval_every = static_cast<std::size_t>(r.number_or(prefix + "eval_every", 100));
  if (tc.alpha <= 0.0) diags.push_back(prefix + "alpha: must be > 0");
  if (tc.batch_size < 1) diags.push_back(prefix + "batch_size: must be >= 1");
  if (tc.eval_every < 1) diags.push_back(prefix + "eval_every: must be >= 1");
  return tc;
}

}  // namespace

RunManifest assemble_manifest(const ManifestFile& file, std::vector<std::string>& diags) {
  Reader r{file, diags};
  RunManifest m;
  m.name = r.str_or("name", fs::path(file.path).stem().string());
  m.output_dir = r.str_or("output_dir", "out/" + m.name);

  // dataset
  m.dataset.source = r.str_or("dataset.source", "");
  m.dataset.train_n = static_cast<std::size_t>(r.number_or("dataset.train_n", 0));
  m.dataset.test_n = static_cast<std::size_t>(r.number_or("dataset.test_n", 0));
  m.dataset.seed = static_cast<std::uint64_t>(r.number_or("dataset.seed", 0));
  m.dataset.dim = static_cast<std::size_t>(r.number_or("dataset.dim", 2));
  m.dataset.separation = r.number_or("dataset.separation", 1.0);
  m.dataset.images_path = r.str_or("dataset.images_path", "");
  m.dataset.labels_path = r.str_or("dataset.labels_path", "");
  m.dataset.path = r.str_or("dataset.path", "");
  m.dataset.label_column = r.str_or("dataset.label_column", "");

  const bool known_source =
      m.dataset.source == "image-blobs" || m.dataset.source == "two-gaussians" ||
      m.dataset.source == "separable-2pt" || m.dataset.source == "idx" ||
      m.dataset.source == "csv" || m.dataset.source.empty();
  if (!known_source) diags.push_back("dataset.source: unknown source '" + m.dataset.source + "'");
  if (m.dataset.source == "idx") {
    if (m.dataset.images_path.empty()) diags.push_back("dataset.images_path: required for idx");
    if (m.dataset.labels_path.empty()) diags.push_back("dataset.labels_path: required for idx");
    if (!m.dataset.images_path.empty() && !fs::exists(m.dataset.images_path)) {
      diags.push_back("dataset.images_path: file does not exist: " + m.dataset.images_path);
    }
    if (!m.dataset.labels_path.empty() && !fs::exists(m.dataset.labels_path)) {
      diags.push_back("dataset.labels_path: file does not exist: " + m.dataset.labels_path);
    }
  }
  if (m.dataset.source == "csv") {
    if (m.dataset.path.empty()) diags.push_back("dataset.path: required for csv");
    if (m.dataset.label_column.empty()) {
      diags.push_back("dataset.label_column: required for csv");
    }
    if (!m.dataset.path.empty() && !fs::exists(m.dataset.path)) {
      diags.push_back("dataset.path: file does not exist: " + m.dataset.path);
    }
  }

  // model
  m.model = read_model(r, diags);

  // trainers: every distinct name under trainer.*
  std::vector<std::string> trainer_names;
  for (const auto& [key, _] : file.values) {
    if (key.rfind("trainer.", 0) != 0) continue;
    const std::size_t dot = key.find('.', 8);
    if (dot == std::string::npos) {
      diags.push_back(key + ": trainer keys must look like trainer.<name>.<field>");
      continue;
    }
    const std::string name = key.substr(8, dot - 8);
    if (std::find(trainer_names.begin(), trainer_names.end(), name) == trainer_names.end()) {
      trainer_names.push_back(name);
    }
  }
  std::sort(trainer_names.begin(), trainer_names.end());
  for (const std::string& name : trainer_names) {
    const std::string prefix = "trainer." + name + ".";
    TrainerEntry entry;
    entry.name = name;
    entry.train = read_train(r, prefix, diags);
    entry.robust = read_robust(r, prefix, diags);
    entry.reg = read_reg(r, prefix, diags);
    m.trainers.push_back(std::move(entry));
  }

  // attack grid
  bool has_attacks = false;
  for (const auto& [key, _] : file.values) {
    if (key.rfind("attacks.", 0) == 0) {
      has_attacks = true;
      break;
    }
  }
  if (has_attacks) {
    AttackGrid grid;
    for (const std::string& k : r.str_list("attacks.kinds")) {
      if (auto kind = parse_attack_kind(k)) {
        grid.kinds.push_back(*kind);
      } else {
        diags.push_back("attacks.kinds: unknown attack '" + k + "'");
      }
    }
    grid.eps_grid = r.num_list("attacks.eps_grid");
    std::sort(grid.eps_grid.begin(), grid.eps_grid.end());
    for (std::size_t i = 0; i + 1 < grid.eps_grid.size(); ++i) {
      if (grid.eps_grid[i] == grid.eps_grid[i + 1]) {
        diags.push_back("attacks.eps_grid: duplicate value " + std::to_string(grid.eps_grid[i]));
        break;
      }
    }
    for (double e : grid.eps_grid) {
      if (e < 0.0) diags.push_back("attacks.eps_grid: budgets must be >= 0");
    }
    grid.steps = static_cast<std::size_t>(r.number_or("attacks.steps", 10));
    grid.step_size = r.number_or("attacks.step_size", 1.0);
    grid.wrm_gamma = r.number_or("attacks.wrm_gamma", 1.0);
    if (grid.kinds.empty()) diags.push_back("attacks.kinds: must be non-empty");
    if (grid.eps_grid.empty()) diags.push_back("attacks.eps_grid: must be non-empty");
    if (grid.steps < 1) diags.push_back("attacks.steps: must be >= 1");
    m.attacks = std::move(grid);
  }

  // federation
  bool has_federation = false;
  for (const auto& [key, _] : file.values) {
    if (key.rfind("federation.", 0) == 0) {
      has_federation = true;
      break;
    }
  }
  if (has_federation) {
    FederationSection fed;
    const auto algs = r.str_list("federation.algorithms");
    for (const std::string& a : algs) {
      if (a == "drfl") {
        fed.algorithms.push_back(FedAlgorithm::Drfl);
      } else if (a == "fedavg") {
        fed.algorithms.push_back(FedAlgorithm::FedAvg);
      } else {
        diags.push_back("federation.algorithms: unknown algorithm '" + a + "'");
      }
    }
    if (fed.algorithms.empty()) diags.push_back("federation.algorithms: must be non-empty");
    fed.base.num_workers = static_cast<std::size_t>(r.number_or("federation.workers", 10));
    fed.base.rounds = static_cast<std::size_t>(r.number_or("federation.rounds", 50));
    fed.base.local_batch = static_cast<std::size_t>(r.number_or("federation.local_batch", 64));
    const std::string part = r.str_or("federation.partition", "iid");
    if (part == "iid") {
      fed.base.partition = PartitionMode::Iid;
    } else if (part == "single-class") {
      fed.base.partition = PartitionMode::SingleClass;
    } else {
      diags.push_back("federation.partition: unknown mode '" + part + "'");
    }
    fed.base.participation = r.number_or("federation.participation", 1.0);
    fed.base.fedavg_local_epochs =
        static_cast<std::size_t>(r.number_or("federation.fedavg_local_epochs", 1));
    fed.base.train.alpha = r.number_or("federation.alpha", 0.001);
    fed.base.train.seed = static_cast<std::uint64_t>(r.number_or("federation.seed", 0));
    fed.base.robust = read_robust(r, "federation.", diags);
    fed.base.reg = read_reg(r, "federation.", diags);
    if (fed.base.num_workers < 1) diags.push_back("federation.workers: must be >= 1");
    if (fed.base.local_batch < 1) diags.push_back("federation.local_batch: must be >= 1");
    if (fed.base.participation != 1.0) {
      diags.push_back("federation.participation: only 1.0 is supported");
    }
    if (fed.base.train.alpha <= 0.0) diags.push_back("federation.alpha: must be > 0");
    if (r.has("federation.eval_attack")) {
      AttackSpec atk;
      const std::string kind = r.str_or("federation.eval_attack", "pgd");
      if (auto k = parse_attack_kind(kind)) {
        atk.kind = *k;
      } else {
        diags.push_back("federation.eval_attack: unknown attack '" + kind + "'");
      }
      atk.eps_adv = r.number_or("federation.eval_eps", 0.1);
      atk.steps = static_cast<std::size_t>(r.number_or("federation.eval_steps", 10));
      if (atk.eps_adv < 0.0) diags.push_back("federation.eval_eps: must be >= 0");
      fed.eval_attack = atk;
    }
    m.federation = std::move(fed);
  }

  return m;
}

std::vector<std::string> validate_manifest(const std::string& path) {
  std::vector<std::string> diags;
  try {
    const ManifestFile file = parse_manifest_file(path);
    assemble_manifest(file, diags);
  } catch (const std::exception& e) {
    diags.push_back(e.what());
  }
  return diags;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CurveRow {
  double x = 0.0;
  std::string method;
  double metric = 0.0;
};

void write_curve_csv(const fs::path& path, std::vector<CurveRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.x < b.x;
  });
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "x,method,metric\n";
  for (const CurveRow& r : rows) {
    out << fmt_double(r.x) << ',' << r.method << ',' << fmt_double(r.metric) << '\n';
  }
}

std::pair<Dataset, Dataset> prepare_dataset(const DatasetSection& d) {
  Dataset full;
  if (d.source == "image-blobs" || d.source == "two-gaussians" ||
      d.source == "separable-2pt") {
    SyntheticSpec spec;
    spec.n = d.train_n + d.test_n;
    spec.dim = d.dim;
    spec.separation = d.separation;
    spec.seed = d.seed;
    if (d.source == "image-blobs") {
      spec.kind = SyntheticKind::ImageBlobs;
    } else if (d.source == "two-gaussians") {
      spec.kind = SyntheticKind::TwoGaussians;
    } else {
      spec.kind = SyntheticKind::Separable2pt;
    }
    full = make_synthetic(spec);
  } else if (d.source == "idx") {
    full = load_idx(d.images_path, d.labels_path);
  } else if (d.source == "csv") {
    full = load_csv(d.path, d.label_column);
  } else {
    throw std::invalid_argument("dataset.source: missing or unknown");
  }
  check_invariants(full);
  return split_train_test(full, d.train_n, d.test_n, d.seed);
}

std::string resolve_output_dir(const RunManifest& m, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("DRO_OUTPUT_DIR"); env && *env) return env;
  return m.output_dir;
}

void write_repro_record(const fs::path& outdir, const RunManifest& m, const ManifestFile& file,
                        const std::string& dataset_provenance) {
  nlohmann::ordered_json rec;
  rec["name"] = m.name;
  rec["manifest_path"] = file.path;
  rec["manifest_hash_fnv1a"] = fnv1a_hex(file.raw);
  rec["library"] = kLibraryVersion;
  rec["dataset_provenance"] = dataset_provenance;
  rec["dataset_seed"] = m.dataset.seed;
  nlohmann::ordered_json trainers = nlohmann::ordered_json::array();
  for (const TrainerEntry& t : m.trainers) {
    trainers.push_back({{"name", t.name},
                        {"algorithm", to_string(t.train.algorithm)},
                        {"seed", t.train.seed}});
  }
  rec["trainers"] = trainers;
  std::ofstream out(outdir / "run_record.json");
  if (!out) throw std::runtime_error("cannot write run_record.json");
  out << rec.dump(2) << '\n';
}

struct TrainedModel {
  std::string name;
  ModelParams params;
};

TrainedModel run_trainer(const RunManifest& m, const TrainerEntry& t,
                         const std::vector<Datum>& train, const std::vector<Datum>& test,
                         const fs::path& outdir) {
  const std::vector<Datum>* holdout = test.empty() ? nullptr : &test;
  RunMetrics metrics;
  ModelParams params;
  switch (t.train.algorithm) {
    case Algorithm::SpgdOracle: {
      auto res = train_spgd_oracle(m.model, t.reg, t.robust, t.train, train, holdout);
      params = std::move(res.params.theta);
      metrics = std::move(res.metrics);
      break;
    }
    case Algorithm::Spgda: {
      auto res = train_spgda(m.model, t.reg, t.robust, t.train, train, holdout);
      params = std::move(res.params.theta);
      metrics = std::move(res.metrics);
      break;
    }
    case Algorithm::ErmSgd:
    case Algorithm::ErmAdam: {
      auto res = train_erm(m.model, t.reg, t.train, train, holdout);
      params = std::move(res.params);
      metrics = std::move(res.metrics);
      break;
    }
  }
  save_checkpoint_file(m.model, params, (outdir / (t.name + ".ckpt")).string());
  {
    std::ofstream csv(outdir / (t.name + "_metrics.csv"));
    write_csv(metrics, csv);
    std::ofstream json(outdir / (t.name + "_metrics.json"));
    write_json(metrics, json);
  }
  return TrainedModel{t.name, std::move(params)};
}

std::vector<CurveRow> sweep_attacks(const ModelSpec& spec, const AttackGrid& grid,
                                    const std::vector<TrainedModel>& models,
                                    const std::vector<Datum>& test, double rho) {
  std::vector<CurveRow> rows;
  for (const TrainedModel& tm : models) {
    for (AttackKind kind : grid.kinds) {
      AttackSpec atk;
      atk.kind = kind;
      atk.steps = grid.steps;
      atk.step_size = grid.step_size;
      atk.wrm_gamma = grid.wrm_gamma;
      for (double eps : grid.eps_grid) {
        atk.eps_adv = eps;
        const double err = evaluate_under_attack(spec, tm.params, test, atk, rho);
        rows.push_back(CurveRow{eps, tm.name + "/" + to_string(kind), err});
      }
    }
  }
  return rows;
}

}  // namespace

int run_manifest(const std::string& path, const std::string& output_override) {
  ManifestFile file;
  std::vector<std::string> diags;
  RunManifest m;
  try {
    file = parse_manifest_file(path);
    m = assemble_manifest(file, diags);
  } catch (const std::exception& e) {
    std::cerr << "manifest error: " << e.what() << "\n";
    return 1;
  }
  if (!diags.empty()) {
    for (const auto& d : diags) std::cerr << "invalid manifest: " << d << "\n";
    return 1;
  }

  const fs::path outdir = resolve_output_dir(m, output_override);
  std::string stage = "setup";
  try {
    fs::create_directories(outdir);

    const bool need_data = !m.trainers.empty() || m.attacks || m.federation;
    Dataset train, test;
    if (need_data) {
      stage = "dataset";
      std::tie(train, test) = prepare_dataset(m.dataset);
    }

    stage = "training";
    std::vector<TrainedModel> models;
    for (const TrainerEntry& t : m.trainers) {
      models.push_back(run_trainer(m, t, train.items, test.items, outdir));
    }

    if (m.attacks && !models.empty()) {
      stage = "attack-eval";
      if (test.items.empty()) {
        throw std::invalid_argument("attack grid requires dataset.test_n >= 1");
      }
      const double rho = m.trainers.empty() ? 25.0 : m.trainers.front().robust.rho;
      write_curve_csv(outdir / "attack_curves.csv",
                      sweep_attacks(m.model, *m.attacks, models, test.items, rho));
    }

    if (m.federation) {
      stage = "federation";
      std::vector<CurveRow> rows;
      for (FedAlgorithm alg : m.federation->algorithms) {
        FederationConfig cfg = m.federation->base;
        cfg.algorithm = alg;
        RoundCallback cb;
        if (m.federation->eval_attack && !test.items.empty()) {
          const AttackSpec atk = *m.federation->eval_attack;
          const std::string method =
              to_string(alg) + "/" + to_string(atk.kind) + "@" + fmt_double(atk.eps_adv);
          cb = [&, atk, method](std::size_t round, const AugmentedParams& aug) {
            rows.push_back(CurveRow{
                static_cast<double>(round), method,
                evaluate_under_attack(m.model, aug.theta, test.items, atk, cfg.robust.rho)});
          };
        }
        const std::vector<Datum>* holdout = test.items.empty() ? nullptr : &test.items;
        TrainResult res = run_federation(cfg, train, m.model, holdout, nullptr, cb);
        for (const MetricsRecord& r : res.metrics.records) {
          rows.push_back(
              CurveRow{static_cast<double>(r.iteration), to_string(alg), r.misclass_rate});
        }
        std::ofstream csv(outdir / ("federation_" + to_string(alg) + "_metrics.csv"));
        write_csv(res.metrics, csv);
        std::ofstream json(outdir / ("federation_" + to_string(alg) + "_metrics.json"));
        write_json(res.metrics, json);
        save_checkpoint_file(m.model, res.params.theta,
                             (outdir / ("federation_" + to_string(alg) + ".ckpt")).string());
      }
      write_curve_csv(outdir / "federation_curves.csv", std::move(rows));
    }

    stage = "record";
    write_repro_record(outdir, m, file, need_data ? train.provenance : "none");
  } catch (const std::exception& e) {
    std::cerr << "pipeline error (" << stage << "): " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int attack_eval(const std::string& checkpoint_path, const std::string& manifest_path,
                const std::string& output_override) {
  ManifestFile file;
  std::vector<std::string> diags;
  RunManifest m;
  try {
    file = parse_manifest_file(manifest_path);
    m = assemble_manifest(file, diags);
  } catch (const std::exception& e) {
    std::cerr << "manifest error: " << e.what() << "\n";
    return 1;
  }
  if (!diags.empty()) {
    for (const auto& d : diags) std::cerr << "invalid manifest: " << d << "\n";
    return 1;
  }
  if (!m.attacks) {
    std::cerr << "attack-eval: manifest has no [attacks] section\n";
    return 1;
  }
  try {
    const fs::path outdir = resolve_output_dir(m, output_override);
    fs::create_directories(outdir);
    auto [train, test] = prepare_dataset(m.dataset);
    if (test.items.empty()) throw std::invalid_argument("attack-eval requires dataset.test_n >= 1");
    const ModelParams params = load_checkpoint_file(m.model, checkpoint_path);
    const double rho = m.trainers.empty() ? 25.0 : m.trainers.front().robust.rho;
    const std::string stem = fs::path(checkpoint_path).stem().string();
    write_curve_csv(outdir / (stem + "_attack_curves.csv"),
                    sweep_attacks(m.model, *m.attacks, {TrainedModel{stem, params}}, test.items,
                                  rho));
  } catch (const std::exception& e) {
    std::cerr << "attack-eval error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dro
