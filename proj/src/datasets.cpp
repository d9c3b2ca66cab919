#include "sharpline/datasets.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "sharpline/errors.hpp"
#include "sharpline/rng.hpp"

namespace sharpline::data {

namespace {

constexpr std::uint64_t kStructureSalt = 0x5354525543ULL;
constexpr std::uint64_t kRotationSalt = 0x524f54ULL;

Matrix centers(const TaskSpec& spec) {
  Matrix c(spec.classes, spec.dim);
  Rng rng(mix_seed(spec.structure_seed, kStructureSalt));
  for (double& x : c.data) x = rng.normal();
  return c;
}

Matrix teacher(const TaskSpec& spec) {
  Matrix w(spec.classes, spec.dim);
  Rng rng(mix_seed(spec.structure_seed, kStructureSalt));
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  for (double& x : w.data) x = scale * rng.normal();
  return w;
}

// Seeded pairing of coordinates for the block rotation. With an odd
// dimension the last coordinate is left fixed.
std::vector<std::size_t> rotation_order(const TaskSpec& spec) {
  std::vector<std::size_t> order(spec.dim);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(spec.rotation_seed, kRotationSalt));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

int nearest_center(const Matrix& c, std::span<const double> x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.rows; ++k) {
    double d = 0.0;
    for (std::size_t j = 0; j < c.cols; ++j) {
      const double diff = x[j] - c(k, j);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Dataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<int> labels;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      double v = 0.0;
      if (!parse_number(f, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (first) {
      first = false;
      if (!numeric) {
        if (fields.size() < 2) throw ParseError(path, line_no, "header needs at least 2 columns");
        width = fields.size();
        continue;
      }
    }
    if (!numeric) throw ParseError(path, line_no, "non-numeric field");
    if (row.size() < 2) throw ParseError(path, line_no, "row needs at least one feature and a label");
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError(path, line_no, "expected " + std::to_string(width) + " columns, got " +
                                          std::to_string(row.size()));
    }
    const double label = row.back();
    if (label < 0 || label != std::floor(label) || label > std::numeric_limits<int>::max()) {
      throw ParseError(path, line_no, "label must be a nonnegative integer");
    }
    labels.push_back(static_cast<int>(label));
    values.insert(values.end(), row.begin(), row.end() - 1);
  }
  if (labels.empty()) throw ParseError(path, line_no, "no data rows");
  Matrix inputs;
  inputs.rows = labels.size();
  inputs.cols = width - 1;
  inputs.data = std::move(values);
  return Dataset(std::move(inputs), std::move(labels));
}

struct IdxFile {
  std::uint8_t type = 0;
  std::vector<std::uint32_t> dims;
  std::vector<char> payload;
  std::size_t payload_offset = 0;
};

std::uint32_t read_be32(const std::vector<char>& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(bytes[offset + i]);
  }
  return v;
}

IdxFile read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw ParseError(path, bytes.size(), "truncated magic number");
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError(path, 0, "bad magic number");
  IdxFile f;
  f.type = static_cast<std::uint8_t>(bytes[2]);
  if (f.type != 0x08 && f.type != 0x0D) throw ParseError(path, 2, "unsupported IDX element type");
  const std::size_t rank = static_cast<std::uint8_t>(bytes[3]);
  if (rank < 1) throw ParseError(path, 3, "IDX rank must be >= 1");
  if (bytes.size() < 4 + 4 * rank) throw ParseError(path, bytes.size(), "truncated dimensions");
  std::size_t elements = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    f.dims.push_back(read_be32(bytes, 4 + 4 * d));
    elements *= f.dims.back();
  }
  f.payload_offset = 4 + 4 * rank;
  const std::size_t elem_size = f.type == 0x08 ? 1 : 4;
  if (bytes.size() != f.payload_offset + elements * elem_size) {
    throw ParseError(path, bytes.size(), "payload size does not match dimensions");
  }
  f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(f.payload_offset), bytes.end());
  return f;
}

Dataset ingest_idx(const std::string& path, const std::string& labels_path) {
  if (labels_path.empty()) throw ParseError(path, 0, "idx-pair needs a label file");
  const IdxFile data = read_idx(path);
  const IdxFile labels = read_idx(labels_path);
  if (labels.dims.size() != 1 || labels.type != 0x08) {
    throw ParseError(labels_path, 2, "label file must be rank-1 u8");
  }
  if (data.dims[0] != labels.dims[0]) {
    throw ParseError(labels_path, 4, "label count " + std::to_string(labels.dims[0]) +
                                         " does not match data count " + std::to_string(data.dims[0]));
  }
  const std::size_t n = data.dims[0];
  if (n == 0) throw ParseError(path, 4, "no examples");
  std::size_t width = 1;
  for (std::size_t d = 1; d < data.dims.size(); ++d) width *= data.dims[d];
  Matrix inputs(n, width);
  for (std::size_t i = 0; i < n * width; ++i) {
    if (data.type == 0x08) {
      inputs.data[i] = static_cast<std::uint8_t>(data.payload[i]) / 255.0;
    } else {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        bits = (bits << 8) | static_cast<std::uint8_t>(data.payload[4 * i + b]);
      }
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) throw ParseError(path, data.payload_offset + 4 * i, "non-finite value");
      inputs.data[i] = v;
    }
  }
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::uint8_t>(labels.payload[i]);
  return Dataset(std::move(inputs), std::move(y));
}

}  // namespace

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::gaussian_mixture_classify: return "gaussian-mixture-classify";
    case TaskKind::linear_regression: return "linear-regression";
    case TaskKind::rotated_variant: return "rotated-variant";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "gaussian-mixture-classify") return TaskKind::gaussian_mixture_classify;
  if (s == "linear-regression") return TaskKind::linear_regression;
  if (s == "rotated-variant") return TaskKind::rotated_variant;
  throw InvalidArgument("unknown task kind '" + s + "'");
}

void TaskSpec::validate() const {
  if (dim < 1) throw InvalidArgument("task dim must be >= 1");
  if (classes < 1) throw InvalidArgument("task needs at least one class/target");
  if (is_classification() && classes < 2) throw InvalidArgument("classification needs >= 2 classes");
  if (!(separation >= 0.0)) throw InvalidArgument("class separation must be nonnegative");
  if (!(noise >= 0.0)) throw InvalidArgument("noise scale must be nonnegative");
}

Batch generate(const TaskSpec& spec, std::size_t start, std::size_t count) {
  if (count == 0) throw InvalidArgument("generate: count must be >= 1");
  spec.validate();
  Batch b;
  b.inputs = Matrix(count, spec.dim);
  b.id = static_cast<std::int64_t>(start);

  if (spec.kind == TaskKind::linear_regression) {
    const Matrix w = teacher(spec);
    b.targets = Matrix(count, spec.classes);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(mix_seed(spec.sample_seed, start + i));
      auto x = b.inputs.row(i);
      for (double& v : x) v = rng.normal();
      for (std::size_t k = 0; k < spec.classes; ++k) {
        double y = 0.0;
        for (std::size_t j = 0; j < spec.dim; ++j) y += w(k, j) * x[j];
        b.targets(i, k) = y + spec.noise * rng.normal();
      }
    }
    return b;
  }

  const Matrix c = centers(spec);
  b.labels.resize(count);
  std::vector<std::size_t> order;
  double cs = 0.0, sn = 0.0;
  if (spec.kind == TaskKind::rotated_variant) {
    order = rotation_order(spec);
    cs = std::cos(spec.angle);
    sn = std::sin(spec.angle);
  }
  // Rotated labels use the nearest scaled center, i.e. the centers the inputs
  // were drawn around.
  Matrix scaled = c;
  for (double& v : scaled.data) v *= spec.separation;
  std::vector<double> rotated(spec.dim);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(spec.sample_seed, start + i));
    const auto component = static_cast<std::size_t>(rng.below(spec.classes));
    auto x = b.inputs.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      x[j] = spec.separation * c(component, j) + spec.noise * rng.normal();
    }
    if (spec.kind == TaskKind::gaussian_mixture_classify) {
      b.labels[i] = static_cast<int>(component);
      continue;
    }
    std::copy(x.begin(), x.end(), rotated.begin());
    for (std::size_t p = 0; p + 1 < order.size(); p += 2) {
      const double u = x[order[p]];
      const double v = x[order[p + 1]];
      rotated[order[p]] = cs * u - sn * v;
      rotated[order[p + 1]] = sn * u + cs * v;
    }
    b.labels[i] = nearest_center(scaled, rotated);
  }
  return b;
}

void attach_one_hot(Batch& batch, std::size_t classes) {
  batch.targets = Matrix(batch.size(), classes);
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    const int y = batch.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw InvalidArgument("label out of range for one-hot");
    batch.targets(i, static_cast<std::size_t>(y)) = 1.0;
  }
}

void MixSpec::validate() const {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidArgument("mix ratio must lie in [0, 1]");
  if (batch_size < 1) throw InvalidArgument("mix batch size must be >= 1");
  task_a.validate();
  task_b.validate();
  if (task_a.dim != task_b.dim) throw InvalidArgument("mixed tasks must share the input dimension");
  if (task_a.is_classification() != task_b.is_classification()) {
    throw InvalidArgument("mixed tasks must share the output head");
  }
}

std::size_t task_a_count(double ratio, std::size_t batch_size) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(batch_size) + 0.5));
}

Batch mix_batch(const MixSpec& mix, std::size_t step) {
  mix.validate();
  const std::size_t B = mix.batch_size;
  const std::size_t na = task_a_count(mix.ratio, B);
  const std::size_t nb = B - na;
  const std::size_t start = step * B;

  std::vector<Batch> parts;
  std::vector<int> part_tag;
  if (na > 0) {
    parts.push_back(generate(mix.task_a, start, na));
    part_tag.push_back(0);
  }
  if (nb > 0) {
    parts.push_back(generate(mix.task_b, start, nb));
    part_tag.push_back(1);
  }

  // Concatenate, then shuffle rows with a permutation seeded by (seed, step).
  const std::size_t dim = mix.task_a.dim;
  const bool classify = mix.task_a.is_classification();
  const std::size_t twidth = classify ? 0 : mix.task_a.classes;
  Batch all;
  all.inputs = Matrix(B, dim);
  if (!classify) all.targets = Matrix(B, twidth);
  std::vector<int> labels(B), tags(B);
  std::size_t row = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t i = 0; i < parts[p].size(); ++i, ++row) {
      std::copy_n(parts[p].inputs.row(i).begin(), dim, all.inputs.row(row).begin());
      if (classify) {
        labels[row] = parts[p].labels[i];
      } else {
        std::copy_n(parts[p].targets.row(i).begin(), twidth, all.targets.row(row).begin());
      }
      tags[row] = part_tag[p];
    }
  }

  std::vector<std::size_t> perm(B);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(mix.seed, step));
  for (std::size_t i = B; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  Batch out;
  out.id = static_cast<std::int64_t>(step);
  out.inputs = Matrix(B, dim);
  if (!classify) out.targets = Matrix(B, twidth);
  out.tags.resize(B);
  if (classify) out.labels.resize(B);
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t src = perm[i];
    std::copy_n(all.inputs.row(src).begin(), dim, out.inputs.row(i).begin());
    if (classify) {
      out.labels[i] = labels[src];
    } else {
      std::copy_n(all.targets.row(src).begin(), twidth, out.targets.row(i).begin());
    }
    out.tags[i] = tags[src];
  }
  return out;
}

FileFormat parse_file_format(const std::string& s) {
  if (s == "csv-labeled") return FileFormat::csv_labeled;
  if (s == "idx-pair") return FileFormat::idx_pair;
  throw InvalidArgument("unknown file format '" + s + "'");
}

Dataset::Dataset(Matrix inputs, std::vector<int> labels)
    : inputs_(std::move(inputs)), labels_(std::move(labels)) {
  require_same_length("dataset labels", inputs_.rows, labels_.size());
  if (inputs_.rows == 0) throw InvalidArgument("dataset is empty");
  int top = 0;
  for (int y : labels_) top = std::max(top, y);
  classes_ = static_cast<std::size_t>(top) + 1;
}

Batch Dataset::batch(std::size_t start, std::size_t count) const {
  if (count == 0) throw InvalidArgument("dataset batch: count must be >= 1");
  Batch b;
  b.id = static_cast<std::int64_t>(start);
  b.inputs = Matrix(count, dim());
  b.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = (start + i) % size();
    std::copy_n(inputs_.row(src).begin(), dim(), b.inputs.row(i).begin());
    b.labels[i] = labels_[src];
  }
  return b;
}

Dataset ingest(const std::string& path, FileFormat format, const std::string& labels_path) {
  switch (format) {
    case FileFormat::csv_labeled:
      return ingest_csv(path);
    case FileFormat::idx_pair:
      return ingest_idx(path, labels_path);
  }
  throw InvalidArgument("unknown file format");
}

}  // namespace sharpline::data
