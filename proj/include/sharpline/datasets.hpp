#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sharpline/model.hpp"

namespace sharpline::data {

enum class TaskKind { gaussian_mixture_classify, linear_regression, rotated_variant };

std::string to_string(TaskKind k);
TaskKind parse_task_kind(const std::string& s);

// Seeded synthetic task.
//
// gaussian-mixture-classify: label ~ U{0..classes-1},
//   x = separation * c_label + noise * z, with centers c_k ~ N(0, I) drawn
//   from structure_seed and z ~ N(0, I).
// linear-regression: x ~ N(0, I), y = W x + noise * z with
//   W ~ N(0, 1/dim) drawn from structure_seed; `classes` is the target width.
// rotated-variant: inputs drawn exactly like gaussian-mixture-classify, but
//   the label is the nearest center to R x, where R rotates seeded coordinate
//   pairs by `angle` radians. angle = 0 reproduces nearest-center labels of
//   the base task; larger angles reduce the overlap between the two label
//   functions.
//
// Example i depends only on (spec, i).
struct TaskSpec {
  TaskKind kind = TaskKind::gaussian_mixture_classify;
  std::size_t dim = 8;
  std::size_t classes = 4;
  double separation = 1.0;
  double noise = 1.0;
  std::uint64_t structure_seed = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t rotation_seed = 0;
  double angle = 0.0;

  void validate() const;
  bool is_classification() const { return kind != TaskKind::linear_regression; }
};

// Examples [start, start + count). Throws InvalidArgument when count == 0.
Batch generate(const TaskSpec& spec, std::size_t start, std::size_t count);

// Two-task mixture: each batch holds round_half_up(ratio * batch_size)
// task-A examples (tag 0) and the rest from task B (tag 1), shuffled by a
// permutation seeded from (seed, step).
struct MixSpec {
  TaskSpec task_a;
  TaskSpec task_b;
  double ratio = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

std::size_t task_a_count(double ratio, std::size_t batch_size);

// Batch `step` of the mixture stream. The A part uses task-A examples
// [step*B, step*B + nA), the B part task-B examples [step*B, step*B + nB).
Batch mix_batch(const MixSpec& mix, std::size_t step);

// Fills `targets` with one-hot rows of `labels` so a classification batch can
// train a squared-error head.
void attach_one_hot(Batch& batch, std::size_t classes);

enum class FileFormat { csv_labeled, idx_pair };
FileFormat parse_file_format(const std::string& s);

// In-memory labelled dataset read from disk.
class Dataset {
 public:
  Dataset(Matrix inputs, std::vector<int> labels);

  std::size_t size() const { return inputs_.rows; }
  std::size_t dim() const { return inputs_.cols; }
  std::size_t classes() const { return classes_; }

  // Examples start..start+count-1, wrapping around the end of the data.
  Batch batch(std::size_t start, std::size_t count) const;

 private:
  Matrix inputs_;
  std::vector<int> labels_;
  std::size_t classes_ = 0;
};

// csv-labeled: comma-separated numeric rows, last column an integer class
//   label, optional header line (detected when the first row does not parse
//   as numbers).
// idx-pair: `path` is the IDX data file and `labels_path` the IDX label
//   file. Big-endian layout: two zero bytes, a type byte (0x08 = u8,
//   0x0D = f32), a rank byte, then rank u32 dimensions, then the data. The
//   label file must have rank 1 and type u8; counts must match. u8 inputs are
//   scaled to [0, 1].
// Malformed input raises ParseError with a line number (CSV) or byte offset
// (IDX).
Dataset ingest(const std::string& path, FileFormat format, const std::string& labels_path = "");

}  // namespace sharpline::data
