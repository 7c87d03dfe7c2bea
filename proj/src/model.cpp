#include "dro/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dro {

namespace {

double act_forward(Activation a, double x) {
  switch (a) {
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Softplus:
      if (x > 30.0) return x;
      if (x < -30.0) return std::exp(x);
      return std::log1p(std::exp(x));
    case Activation::Tanh:
      return std::tanh(x);
  }
  return 0.0;
}

double act_derivative(Activation a, double x) {
  switch (a) {
    case Activation::Relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::Softplus: {
      // sigmoid(x), stable at both tails
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      double e = std::exp(x);
      return e / (1.0 + e);
    }
    case Activation::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 0.0;
}

bool is_classifier(const ModelSpec& spec) {
  return spec.kind == ModelKind::Logistic || spec.kind == ModelKind::Mlp;
}

struct ForwardCache {
  // pre[l] holds layer l's affine output, post[l] the activated value
  // (post.back() == logits, never activated).
  std::vector<Vec> pre;
  std::vector<Vec> post;
};

Vec forward(const ModelSpec& spec, const ModelParams& params, const Vec& x,
            ForwardCache* cache) {
  const auto dims = layer_dims(spec);
  if (x.size() != spec.input_dim) {
    throw dimension_error("model forward: input length " + std::to_string(x.size()) +
                          " vs input_dim " + std::to_string(spec.input_dim));
  }
  if (params.flat.size() != param_count(spec)) {
    throw dimension_error("model forward: params length " +
                          std::to_string(params.flat.size()) + " vs expected " +
                          std::to_string(param_count(spec)));
  }
  Vec a = x;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    const double* W = params.flat.data() + offset;
    const double* b = W + in * out;
    Vec z(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = b[r];
      const double* row = W + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += row[c] * a[c];
      z[r] = acc;
    }
    offset += in * out + out;
    const bool last = (l + 1 == dims.size());
    Vec activated;
    if (last) {
      activated = z;
    } else {
      activated.resize(out);
      for (std::size_t r = 0; r < out; ++r) activated[r] = act_forward(spec.activation, z[r]);
    }
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(activated);
    }
    a = std::move(activated);
  }
  return a;
}

// Loss value and gradient of the loss w.r.t. the logits.
double loss_and_dlogits(const ModelSpec& spec, const Vec& logits, double y, Vec* dlogits) {
  if (is_classifier(spec)) {
    const int label = static_cast<int>(y);
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
      throw std::invalid_argument("loss: label " + std::to_string(label) +
                                  " out of range for " + std::to_string(logits.size()) +
                                  " classes");
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    if (dlogits) {
      dlogits->resize(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        (*dlogits)[i] = std::exp(logits[i] - lse);
      }
      (*dlogits)[static_cast<std::size_t>(label)] -= 1.0;
    }
    return lse - logits[static_cast<std::size_t>(label)];
  }
  if (spec.kind == ModelKind::LinearScore) {
    if (dlogits) *dlogits = Vec{1.0};
    return logits[0];
  }
  const double r = logits[0] - y;
  if (dlogits) *dlogits = Vec{2.0 * r};
  return r * r;
}

struct GradResult {
  double loss = 0.0;
  Vec d_params;
  Vec d_input;
};

GradResult backward(const ModelSpec& spec, const ModelParams& params, const Datum& z,
                    bool want_params, bool want_input) {
  const auto dims = layer_dims(spec);
  ForwardCache cache;
  const Vec logits = forward(spec, params, z.x, &cache);

  GradResult res;
  Vec delta;
  res.loss = loss_and_dlogits(spec, logits, z.y, &delta);
  if (want_params) res.d_params.assign(params.flat.size(), 0.0);

  // layer offsets in the flat vector
  std::vector<std::size_t> offsets(dims.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    offsets[l] = off;
    off += dims[l].first * dims[l].second + dims[l].second;
  }

  for (std::size_t li = dims.size(); li-- > 0;) {
    const auto [in, out] = dims[li];
    const Vec& input_act = (li == 0) ? z.x : cache.post[li - 1];
    const double* W = params.flat.data() + offsets[li];
    if (want_params) {
      double* dW = res.d_params.data() + offsets[li];
      double* db = dW + in * out;
      for (std::size_t r = 0; r < out; ++r) {
        const double d = delta[r];
        double* dWrow = dW + r * in;
        for (std::size_t c = 0; c < in; ++c) dWrow[c] += d * input_act[c];
        db[r] += d;
      }
    }
    const bool need_back = (li > 0) || want_input;
    if (!need_back) break;
    Vec prev(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double d = delta[r];
      const double* Wrow = W + r * in;
      for (std::size_t c = 0; c < in; ++c) prev[c] += Wrow[c] * d;
    }
    if (li > 0) {
      const Vec& pre = cache.pre[li - 1];
      for (std::size_t c = 0; c < in; ++c) prev[c] *= act_derivative(spec.activation, pre[c]);
    }
    delta = std::move(prev);
  }
  if (want_input) res.d_input = std::move(delta);
  return res;
}

}  // namespace

void validate_spec(const ModelSpec& spec) {
  if (spec.input_dim == 0) throw std::invalid_argument("ModelSpec: input_dim must be positive");
  if (spec.kind == ModelKind::LinearRegression) {
    if (spec.output_dim != 1) {
      throw std::invalid_argument("ModelSpec: linear-regression requires output_dim 1");
    }
  } else if (spec.output_dim < 2) {
    throw std::invalid_argument("ModelSpec: classifier requires at least 2 classes");
  }
  if (spec.kind == ModelKind::Mlp && spec.hidden_dims.empty()) {
    throw std::invalid_argument("ModelSpec: mlp requires hidden_dims");
  }
  if (spec.kind != ModelKind::Mlp && !spec.hidden_dims.empty()) {
    throw std::invalid_argument("ModelSpec: hidden_dims only valid for mlp");
  }
  for (std::size_t h : spec.hidden_dims) {
    if (h == 0) throw std::invalid_argument("ModelSpec: hidden dims must be positive");
  }
  if (spec.l1_weight < 0.0 || spec.l2_weight < 0.0) {
    throw std::invalid_argument("ModelSpec: regularizer weights must be >= 0");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> layer_dims(const ModelSpec& spec) {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  if (spec.kind == ModelKind::Mlp) {
    std::size_t prev = spec.input_dim;
    for (std::size_t h : spec.hidden_dims) {
      dims.emplace_back(prev, h);
      prev = h;
    }
    dims.emplace_back(prev, spec.output_dim);
  } else {
    dims.emplace_back(spec.input_dim, spec.output_dim);
  }
  return dims;
}

std::size_t param_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& [in, out] : layer_dims(spec)) n += in * out + out;
  return n;
}

std::uint64_t spec_hash(const ModelSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.kind) << '|' << spec.input_dim << '|' << spec.output_dim << '|';
  for (std::size_t h : spec.hidden_dims) os << h << ',';
  os << '|' << to_string(spec.activation);
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelParams init_params(const ModelSpec& spec, SeededRng& rng) {
  validate_spec(spec);
  ModelParams p;
  p.flat.resize(param_count(spec));
  for (double& w : p.flat) w = rng.uniform(-0.05, 0.05);
  return p;
}

double loss(const ModelSpec& spec, const ModelParams& params, const Datum& z) {
  const Vec logits = forward(spec, params, z.x, nullptr);
  return loss_and_dlogits(spec, logits, z.y, nullptr);
}

Vec grad_params_single(const ModelSpec& spec, const ModelParams& params, const Datum& z) {
  return backward(spec, params, z, true, false).d_params;
}

Vec grad_params(const ModelSpec& spec, const ModelParams& params,
                const std::vector<Datum>& batch) {
  if (batch.empty()) throw std::invalid_argument("grad_params: empty batch");
  Vec acc(params.flat.size(), 0.0);
  for (const Datum& z : batch) {
    const Vec g = grad_params_single(spec, params, z);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : acc) v *= inv;
  return acc;
}

Vec grad_input(const ModelSpec& spec, const ModelParams& params, const Datum& z) {
  return backward(spec, params, z, false, true).d_input;
}

Vec scores(const ModelSpec& spec, const ModelParams& params, const Vec& x) {
  return forward(spec, params, x, nullptr);
}

int predict_class(const ModelSpec& spec, const ModelParams& params, const Vec& x) {
  if (!is_classifier(spec)) {
    throw std::invalid_argument("predict_class: not a classifier model");
  }
  const Vec s = scores(spec, params, x);
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;  // ties keep the lowest index
  }
  return static_cast<int>(best);
}

double predict_value(const ModelSpec& spec, const ModelParams& params, const Vec& x) {
  if (is_classifier(spec)) {
    throw std::invalid_argument("predict_value: not a regression model");
  }
  return scores(spec, params, x)[0];
}

double misclassification_rate(const ModelSpec& spec, const ModelParams& params,
                              const std::vector<Datum>& data) {
  if (data.empty()) throw std::invalid_argument("misclassification_rate: empty dataset");
  std::size_t wrong = 0;
  for (const Datum& z : data) {
    if (predict_class(spec, params, z.x) != z.label()) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'R', 'O', 'M', 'P', '0', '0', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const ModelSpec& spec, const ModelParams& params, std::ostream& out) {
  if (params.flat.size() != param_count(spec)) {
    throw dimension_error("save_checkpoint: params do not match spec");
  }
  out.write(kCheckpointMagic, 8);
  write_u64_le(out, spec_hash(spec));
  write_u64_le(out, params.flat.size());
  for (double w : params.flat) write_u64_le(out, std::bit_cast<std::uint64_t>(w));
}

ModelParams load_checkpoint(const ModelSpec& spec, std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint64_t hash = read_u64_le(in);
  if (hash != spec_hash(spec)) {
    throw std::runtime_error("checkpoint: spec hash mismatch");
  }
  const std::uint64_t n = read_u64_le(in);
  if (n != param_count(spec)) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }
  ModelParams p;
  p.flat.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    p.flat[i] = std::bit_cast<double>(read_u64_le(in));
  }
  return p;
}

void save_checkpoint_file(const ModelSpec& spec, const ModelParams& params,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_checkpoint(spec, params, out);
}

ModelParams load_checkpoint_file(const ModelSpec& spec, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return load_checkpoint(spec, in);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearRegression:
      return "linear-regression";
    case ModelKind::Logistic:
      return "logistic";
    case ModelKind::Mlp:
      return "mlp";
  }
  return "?";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Relu:
      return "relu";
    case Activation::Softplus:
      return "softplus";
    case Activation::Tanh:
      return "tanh";
  }
  return "?";
}

}  // namespace dro
