#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sharpline/param_vector.hpp"

namespace sharpline {

enum class Activation { gelu, relu, identity };
enum class OutputHead { mse, cross_entropy };

std::string to_string(Activation a);
std::string to_string(OutputHead h);
Activation parse_activation(const std::string& s);
OutputHead parse_output_head(const std::string& s);

// Fully connected network. widths = {input, hidden..., output}; the activation
// is applied after every layer except the last. Parameters are laid out layer
// by layer as W (out x in, row-major) followed by b (out).
struct ModelSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::gelu;
  OutputHead head = OutputHead::cross_entropy;
  std::uint64_t init_seed = 0;
  double init_scale = 1.0;

  // Throws InvalidArgument unless there are >= 2 widths, all >= 1, and
  // init_scale > 0.
  void validate() const;
  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t param_count() const;
  // W ~ N(0, init_scale^2 / fan_in), b = 0, drawn from init_seed.
  ParamVector init_params() const;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// A batch of examples. Regression heads read `targets`, classification heads
// read `labels`. `tags` marks the source task of each example in mixed
// batches (0 = task A, 1 = task B); empty means untagged.
struct Batch {
  Matrix inputs;
  Matrix targets;
  std::vector<int> labels;
  std::int64_t id = 0;
  std::vector<int> tags;

  std::size_t size() const { return inputs.rows; }
  friend bool operator==(const Batch&, const Batch&) = default;
};

// Throws InvalidArgument/LengthMismatch if the batch is empty or does not fit
// the model's input/output shape.
void validate_batch(const Batch& batch, const ModelSpec& spec);

// Anything with a scalar loss over a flat parameter vector.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double loss(std::span<const double> params) const = 0;
  // Writes the gradient into `grad` and returns the loss.
  virtual double loss_and_gradient(std::span<const double> params,
                                   std::span<double> grad) const = 0;
};

// Mean per-example loss of an MLP on a fixed batch. Mean squared error uses
// 0.5 * ||f(x) - y||^2 per example; cross-entropy is softmax + NLL.
// Examples are reduced sequentially in batch order.
class MlpObjective final : public Objective {
 public:
  MlpObjective(ModelSpec spec, Batch batch);

  std::size_t dim() const override { return param_count_; }
  double loss(std::span<const double> params) const override;
  double loss_and_gradient(std::span<const double> params,
                           std::span<double> grad) const override;

  const ModelSpec& spec() const { return spec_; }
  const Batch& batch() const { return batch_; }

 private:
  ModelSpec spec_;
  Batch batch_;
  std::size_t param_count_;
};

double loss(const ParamVector& params, const ModelSpec& spec, const Batch& batch);
ParamVector gradient(const ParamVector& params, const ModelSpec& spec, const Batch& batch);

ParamVector gradient(const Objective& objective, const ParamVector& params);

inline constexpr double kDefaultHvpEps = 1e-3;

// Hessian-vector product by central differences of the gradient:
//   (g(theta + h v/|v|) - g(theta - h v/|v|)) * |v| / (2h)
// with h = eps * max(1, rms(theta)) rounded down to a power of two, so the
// shifted points are exact for dyadic inputs and affine gradients give an
// exact product. Throws ZeroDirectionError when |v| = 0.
ParamVector hvp(const Objective& objective, const ParamVector& params, const ParamVector& v,
                double eps = kDefaultHvpEps);
ParamVector hvp(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                const ParamVector& v, double eps = kDefaultHvpEps);

// Evaluates eta -> L(theta - eta * delta) on a fixed objective. The base loss
// is computed once at construction and counts as one evaluation.
//
// Non-finite trial losses are reported as +inf: a diverged step is an
// increase. Not thread-safe; one probe belongs to one caller.
class LossProbe {
 public:
  LossProbe(std::shared_ptr<const Objective> objective, ParamVector base, ParamVector delta,
            std::string loss_id = "L");

  double base_loss() const noexcept { return base_loss_; }
  double eval(double eta);
  std::size_t evaluations() const noexcept { return evaluations_; }

  const ParamVector& base_params() const noexcept { return base_; }
  const ParamVector& delta() const noexcept { return delta_; }
  const std::string& loss_id() const noexcept { return loss_id_; }
  const Objective& objective() const noexcept { return *objective_; }

 private:
  std::shared_ptr<const Objective> objective_;
  ParamVector base_;
  ParamVector delta_;
  std::string loss_id_;
  std::vector<double> scratch_;
  double base_loss_ = 0.0;
  std::size_t evaluations_ = 0;
};

LossProbe make_probe(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                     const ParamVector& delta, std::string loss_id = "L");
LossProbe make_probe(std::shared_ptr<const Objective> objective, const ParamVector& params,
                     const ParamVector& delta, std::string loss_id = "L");

}  // namespace sharpline
