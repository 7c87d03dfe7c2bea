#include "dro/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dro {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, std::size_t offset, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) {
    throw parse_error(path + ": truncated at offset " + std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(buf[0]) << 24) |
         (static_cast<std::uint32_t>(buf[1]) << 16) |
         (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  const char buf[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  out.write(buf, 4);
}

double pixel_to_feature(unsigned char p) { return 2.0 * (static_cast<double>(p) / 255.0) - 1.0; }

unsigned char feature_to_pixel(double x) {
  const double p = std::round((x + 1.0) / 2.0 * 255.0);
  return static_cast<unsigned char>(std::min(255.0, std::max(0.0, p)));
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw parse_error("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw parse_error("cannot open " + labels_path);

  const std::uint32_t img_magic = read_u32_be(img, 0, images_path);
  if (img_magic != kIdxImagesMagic) {
    throw parse_error(images_path + ": bad magic at offset 0 (got 0x" +
                      [&] { std::ostringstream o; o << std::hex << img_magic; return o.str(); }() +
                      ", want 0x803)");
  }
  const std::uint32_t n_img = read_u32_be(img, 4, images_path);
  const std::uint32_t rows = read_u32_be(img, 8, images_path);
  const std::uint32_t cols = read_u32_be(img, 12, images_path);

  const std::uint32_t lab_magic = read_u32_be(lab, 0, labels_path);
  if (lab_magic != kIdxLabelsMagic) {
    throw parse_error(labels_path + ": bad magic at offset 0 (want 0x801)");
  }
  const std::uint32_t n_lab = read_u32_be(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw parse_error("idx count mismatch: " + std::to_string(n_img) + " images vs " +
                      std::to_string(n_lab) + " labels");
  }

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  Dataset ds;
  ds.feature_dim = dim;
  ds.provenance = "idx:" + images_path;
  ds.items.reserve(n_img);

  std::vector<unsigned char> buf(dim);
  int max_label = -1;
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
    if (!img) {
      throw parse_error(images_path + ": truncated at offset " +
                        std::to_string(16 + static_cast<std::size_t>(i) * dim));
    }
    Datum d;
    d.x.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) d.x[j] = pixel_to_feature(buf[j]);
    char lbl;
    lab.read(&lbl, 1);
    if (!lab) {
      throw parse_error(labels_path + ": truncated at offset " + std::to_string(8 + i));
    }
    d.y = static_cast<double>(static_cast<unsigned char>(lbl));
    max_label = std::max(max_label, d.label());
    ds.items.push_back(std::move(d));
  }
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(
      static_cast<double>(ds.feature_dim))));
  if (static_cast<std::size_t>(side) * side != ds.feature_dim) {
    throw std::invalid_argument("save_idx: feature_dim must be a perfect square");
  }
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path + " for writing");
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path + " for writing");

  write_u32_be(img, kIdxImagesMagic);
  write_u32_be(img, static_cast<std::uint32_t>(ds.items.size()));
  write_u32_be(img, side);
  write_u32_be(img, side);
  write_u32_be(lab, kIdxLabelsMagic);
  write_u32_be(lab, static_cast<std::uint32_t>(ds.items.size()));

  std::vector<unsigned char> buf(ds.feature_dim);
  for (const Datum& d : ds.items) {
    for (std::size_t j = 0; j < ds.feature_dim; ++j) buf[j] = feature_to_pixel(d.x[j]);
    img.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    const char lbl = static_cast<char>(d.label());
    lab.write(&lbl, 1);
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, std::size_t line_no, const std::string& path) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0')) {
    throw parse_error(path + ":" + std::to_string(line_no) + ": non-numeric cell '" + s + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty file");
  const auto header = split_csv_line(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_idx = i;
      break;
    }
  }
  if (label_idx == header.size()) {
    throw parse_error(path + ": label column '" + label_column + "' not found");
  }

  Dataset ds;
  ds.feature_dim = header.size() - 1;
  ds.provenance = "csv:" + path;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": ragged row (" +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()) + ")");
    }
    Datum d;
    d.x.reserve(ds.feature_dim);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double v = parse_number(cells[i], line_no, path);
      if (i == label_idx) {
        if (v < 0.0 || v != std::floor(v)) {
          throw parse_error(path + ":" + std::to_string(line_no) +
                            ": label must be a non-negative integer, got '" + cells[i] + "'");
        }
        d.y = v;
      } else {
        d.x.push_back(v);
      }
    }
    max_label = std::max(max_label, d.label());
    ds.items.push_back(std::move(d));
  }
  if (ds.items.empty()) throw parse_error(path + ": no data rows");
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  normalize_minmax(ds);
  return ds;
}

Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.items.size()) {
    throw std::invalid_argument("subsample: n exceeds dataset size");
  }
  std::vector<std::size_t> idx(ds.items.size());
  std::iota(idx.begin(), idx.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(idx);
  Dataset out;
  out.num_classes = ds.num_classes;
  out.feature_dim = ds.feature_dim;
  out.provenance = ds.provenance + "#subsample(n=" + std::to_string(n) +
                   ",seed=" + std::to_string(seed) + ")";
  out.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.items.push_back(ds.items[idx[i]]);
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, std::size_t n_train,
                                             std::size_t n_test, std::uint64_t seed) {
  if (n_train + n_test > ds.items.size()) {
    throw std::invalid_argument("split_train_test: n_train + n_test exceeds dataset size");
  }
  std::vector<std::size_t> idx(ds.items.size());
  std::iota(idx.begin(), idx.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(idx);
  Dataset train, test;
  train.num_classes = test.num_classes = ds.num_classes;
  train.feature_dim = test.feature_dim = ds.feature_dim;
  train.provenance = ds.provenance + "#train";
  test.provenance = ds.provenance + "#test";
  for (std::size_t i = 0; i < n_train; ++i) train.items.push_back(ds.items[idx[i]]);
  for (std::size_t i = 0; i < n_test; ++i) test.items.push_back(ds.items[idx[n_train + i]]);
  return {std::move(train), std::move(test)};
}

namespace {

struct Blob {
  double row, col, sigma, amp;
};

// Fixed per-class blob layout; independent of the sample seed so that
// different draws share class geometry.
std::vector<Blob> class_template(std::size_t cls) {
  SeededRng rng(0xB10B5000ULL + cls);
  std::vector<Blob> blobs(3);
  for (Blob& b : blobs) {
    b.row = rng.uniform(5.0, 23.0);
    b.col = rng.uniform(5.0, 23.0);
    b.sigma = rng.uniform(1.8, 3.2);
    b.amp = rng.uniform(0.75, 1.0);
  }
  return blobs;
}

Datum render_image_blob(std::size_t cls, SeededRng& rng) {
  constexpr std::size_t side = 28;
  const auto blobs = class_template(cls);
  Datum d;
  d.y = static_cast<double>(cls);
  d.x.assign(side * side, 0.0);
  std::vector<Blob> jittered = blobs;
  for (Blob& b : jittered) {
    b.row += rng.uniform(-1.5, 1.5);
    b.col += rng.uniform(-1.5, 1.5);
    b.sigma = std::max(0.8, b.sigma + rng.uniform(-0.3, 0.3));
    b.amp = std::max(0.2, b.amp + rng.uniform(-0.15, 0.15));
  }
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      double v = 0.0;
      for (const Blob& b : jittered) {
        const double dr = static_cast<double>(r) - b.row;
        const double dc = static_cast<double>(c) - b.col;
        v += b.amp * std::exp(-(dr * dr + dc * dc) / (2.0 * b.sigma * b.sigma));
      }
      v += rng.uniform(0.0, 0.08);
      v = std::min(1.0, std::max(0.0, v));
      d.x[r * side + c] = 2.0 * v - 1.0;
    }
  }
  return d;
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("make_synthetic: n must be >= 2");
  if (spec.dim < 1) throw std::invalid_argument("make_synthetic: dim must be >= 1");
  Dataset ds;
  SeededRng rng(spec.seed);
  switch (spec.kind) {
    case SyntheticKind::TwoGaussians: {
      ds.num_classes = 2;
      ds.feature_dim = spec.dim;
      ds.provenance = "synthetic:two-gaussians(n=" + std::to_string(spec.n) +
                      ",dim=" + std::to_string(spec.dim) + ",seed=" + std::to_string(spec.seed) +
                      ")";
      for (std::size_t i = 0; i < spec.n; ++i) {
        Datum d;
        d.y = static_cast<double>(i % 2);
        d.x.resize(spec.dim);
        const double center = (d.label() == 0) ? spec.separation : -spec.separation;
        for (std::size_t j = 0; j < spec.dim; ++j) {
          d.x[j] = (j == 0 ? center : 0.0) + rng.normal();
        }
        ds.items.push_back(std::move(d));
      }
      normalize_minmax(ds);
      break;
    }
    case SyntheticKind::Separable2pt: {
      ds.num_classes = 2;
      ds.feature_dim = spec.dim;
      ds.provenance = "synthetic:separable-2pt(dim=" + std::to_string(spec.dim) + ")";
      const double a = std::min(std::abs(spec.separation), 1.0);
      for (std::size_t i = 0; i < spec.n; ++i) {
        Datum d;
        d.y = static_cast<double>(i % 2);
        d.x.assign(spec.dim, 0.0);
        d.x[0] = (d.label() == 0) ? a : -a;
        ds.items.push_back(std::move(d));
      }
      break;
    }
    case SyntheticKind::ImageBlobs: {
      ds.num_classes = 10;
      ds.feature_dim = 28 * 28;
      ds.provenance = "synthetic:image-blobs(n=" + std::to_string(spec.n) +
                      ",seed=" + std::to_string(spec.seed) + ")";
      for (std::size_t i = 0; i < spec.n; ++i) {
        ds.items.push_back(render_image_blob(i % 10, rng));
      }
      break;
    }
  }
  return ds;
}

void normalize_minmax(Dataset& ds) {
  if (ds.items.empty()) return;
  for (std::size_t j = 0; j < ds.feature_dim; ++j) {
    double lo = ds.items[0].x[j], hi = ds.items[0].x[j];
    for (const Datum& d : ds.items) {
      lo = std::min(lo, d.x[j]);
      hi = std::max(hi, d.x[j]);
    }
    if (lo == -1.0 && hi == 1.0) continue;  // already normalized, keep bitwise identity
    if (hi > lo) {
      const double inv = 1.0 / (hi - lo);
      for (Datum& d : ds.items) d.x[j] = 2.0 * (d.x[j] - lo) * inv - 1.0;
    } else {
      for (Datum& d : ds.items) d.x[j] = 0.0;
    }
  }
}

void check_invariants(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const Datum& d = ds.items[i];
    if (d.x.size() != ds.feature_dim) {
      throw std::runtime_error("dataset item " + std::to_string(i) + ": feature dim mismatch");
    }
    for (double v : d.x) {
      if (!std::isfinite(v) || v < -1.0 - 1e-12 || v > 1.0 + 1e-12) {
        throw std::runtime_error("dataset item " + std::to_string(i) +
                                 ": feature out of [-1,1]");
      }
    }
    if (d.label() < 0 || static_cast<std::size_t>(d.label()) >= ds.num_classes) {
      throw std::runtime_error("dataset item " + std::to_string(i) + ": label out of range");
    }
  }
}

}  // namespace dro
