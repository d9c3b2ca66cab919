#include "sharpline/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sharpline/errors.hpp"
#include "sharpline/rng.hpp"

namespace sharpline {

namespace {

// tanh approximation of GeLU.
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double activate(Activation a, double x) {
  switch (a) {
    case Activation::gelu: {
      const double u = kGeluC * (x + kGeluA * x * x * x);
      return 0.5 * x * (1.0 + std::tanh(u));
    }
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::identity:
      return x;
  }
  return x;
}

double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::gelu: {
      const double u = kGeluC * (x + kGeluA * x * x * x);
      const double t = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    }
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

void require_finite_layer(std::span<const double> z, std::size_t layer) {
  for (double x : z) {
    if (!std::isfinite(x)) throw NonFiniteError("layer " + std::to_string(layer));
  }
}

// Per-call workspace: pre-activations and activations of every layer for a
// single example.
struct Workspace {
  std::vector<std::vector<double>> pre;   // z_l, l = 1..L
  std::vector<std::vector<double>> post;  // a_l, a_0 = input
  std::vector<double> delta;
  std::vector<double> delta_next;
  std::vector<std::size_t> offsets;  // start of layer l's W in the flat vector

  explicit Workspace(const ModelSpec& spec) {
    const std::size_t L = spec.layer_count();
    offsets.resize(L);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < L; ++l) {
      offsets[l] = offset;
      offset += spec.widths[l + 1] * spec.widths[l] + spec.widths[l + 1];
    }
    pre.resize(L);
    post.resize(L + 1);
    post[0].resize(spec.widths[0]);
    std::size_t widest = 0;
    for (std::size_t l = 0; l < L; ++l) {
      pre[l].resize(spec.widths[l + 1]);
      post[l + 1].resize(spec.widths[l + 1]);
    }
    for (std::size_t w : spec.widths) widest = std::max(widest, w);
    delta.resize(widest);
    delta_next.resize(widest);
  }
};

// Forward pass for one example; returns the per-example loss and leaves the
// output-layer error signal dL/dz_L in ws.delta when `want_delta` is set.
double forward_example(const ModelSpec& spec, std::span<const double> params,
                       const Batch& batch, std::size_t i, Workspace& ws, bool want_delta) {
  const std::size_t L = spec.layer_count();
  std::copy(batch.inputs.row(i).begin(), batch.inputs.row(i).end(), ws.post[0].begin());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const double* W = params.data() + offset;
    const double* b = W + out * in;
    const double* a = ws.post[l].data();
    double* z = ws.pre[l].data();
    for (std::size_t r = 0; r < out; ++r) {
      const double* w_row = W + r * in;
      double acc = b[r];
      for (std::size_t c = 0; c < in; ++c) acc += w_row[c] * a[c];
      z[r] = acc;
    }
    require_finite_layer(ws.pre[l], l + 1);
    double* next = ws.post[l + 1].data();
    if (l + 1 < L) {
      for (std::size_t r = 0; r < out; ++r) next[r] = activate(spec.activation, z[r]);
    } else {
      std::copy(z, z + out, next);
    }
    offset += out * in + out;
  }

  const std::span<const double> y = ws.post[L];
  const std::size_t k = y.size();
  double example_loss = 0.0;
  if (spec.head == OutputHead::mse) {
    const auto t = batch.targets.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double d = y[j] - t[j];
      example_loss += 0.5 * d * d;
      if (want_delta) ws.delta[j] = d;
    }
  } else {
    const auto label = static_cast<std::size_t>(batch.labels[i]);
    const double m = *std::max_element(y.begin(), y.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(y[j] - m);
    const double lse = m + std::log(s);
    example_loss = lse - y[label];
    if (want_delta) {
      for (std::size_t j = 0; j < k; ++j) ws.delta[j] = std::exp(y[j] - lse);
      ws.delta[label] -= 1.0;
    }
  }
  if (!std::isfinite(example_loss)) throw NonFiniteError("loss (output head)");
  return example_loss;
}

// Accumulates dL_i/dtheta into grad, given dL_i/dz_L in ws.delta.
void backward_example(const ModelSpec& spec, std::span<const double> params, Workspace& ws,
                      std::span<double> grad) {
  const std::size_t L = spec.layer_count();
  const auto& offsets = ws.offsets;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const double* W = params.data() + offsets[l];
    double* gW = grad.data() + offsets[l];
    double* gb = gW + out * in;
    const double* a = ws.post[l].data();
    const double* d = ws.delta.data();
    for (std::size_t r = 0; r < out; ++r) {
      double* g_row = gW + r * in;
      const double dr = d[r];
      for (std::size_t c = 0; c < in; ++c) g_row[c] += dr * a[c];
      gb[r] += dr;
    }
    if (l == 0) break;
    double* dn = ws.delta_next.data();
    std::fill(dn, dn + in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double* w_row = W + r * in;
      const double dr = d[r];
      for (std::size_t c = 0; c < in; ++c) dn[c] += w_row[c] * dr;
    }
    const double* z_prev = ws.pre[l - 1].data();
    for (std::size_t c = 0; c < in; ++c) dn[c] *= activate_grad(spec.activation, z_prev[c]);
    std::swap(ws.delta, ws.delta_next);
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::gelu: return "gelu";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string to_string(OutputHead h) {
  return h == OutputHead::mse ? "mse" : "cross-entropy";
}

Activation parse_activation(const std::string& s) {
  if (s == "gelu") return Activation::gelu;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw InvalidArgument("unknown activation '" + s + "'");
}

OutputHead parse_output_head(const std::string& s) {
  if (s == "mse") return OutputHead::mse;
  if (s == "cross-entropy") return OutputHead::cross_entropy;
  throw InvalidArgument("unknown output head '" + s + "'");
}

void ModelSpec::validate() const {
  if (widths.size() < 2) throw InvalidArgument("model needs at least 2 widths (input, output)");
  for (std::size_t w : widths) {
    if (w < 1) throw InvalidArgument("layer widths must be >= 1");
  }
  if (!(init_scale > 0.0)) throw InvalidArgument("init_scale must be positive");
}

std::size_t ModelSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * widths[l] + widths[l + 1];
  return n;
}

ParamVector ModelSpec::init_params() const {
  validate();
  std::vector<double> p(param_count(), 0.0);
  Rng rng(init_seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    const double scale = init_scale / std::sqrt(static_cast<double>(in));
    for (std::size_t j = 0; j < out * in; ++j) p[offset + j] = scale * rng.normal();
    offset += out * in + out;
  }
  return ParamVector(std::move(p));
}

void validate_batch(const Batch& batch, const ModelSpec& spec) {
  if (batch.size() == 0) throw InvalidArgument("batch is empty");
  require_same_length("batch input width", spec.input_width(), batch.inputs.cols);
  if (spec.head == OutputHead::mse) {
    require_same_length("batch target rows", batch.size(), batch.targets.rows);
    require_same_length("batch target width", spec.output_width(), batch.targets.cols);
  } else {
    require_same_length("batch labels", batch.size(), batch.labels.size());
    for (int y : batch.labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= spec.output_width()) {
        throw InvalidArgument("label " + std::to_string(y) + " out of range for " +
                              std::to_string(spec.output_width()) + " classes");
      }
    }
  }
  if (!batch.tags.empty()) require_same_length("batch tags", batch.size(), batch.tags.size());
}

MlpObjective::MlpObjective(ModelSpec spec, Batch batch)
    : spec_(std::move(spec)), batch_(std::move(batch)) {
  spec_.validate();
  validate_batch(batch_, spec_);
  param_count_ = spec_.param_count();
}

double MlpObjective::loss(std::span<const double> params) const {
  require_same_length("params", param_count_, params.size());
  Workspace ws(spec_);
  double total = 0.0;
  for (std::size_t i = 0; i < batch_.size(); ++i) {
    total += forward_example(spec_, params, batch_, i, ws, false);
  }
  return total / static_cast<double>(batch_.size());
}

double MlpObjective::loss_and_gradient(std::span<const double> params,
                                       std::span<double> grad) const {
  require_same_length("params", param_count_, params.size());
  require_same_length("gradient buffer", param_count_, grad.size());
  std::fill(grad.begin(), grad.end(), 0.0);
  Workspace ws(spec_);
  double total = 0.0;
  for (std::size_t i = 0; i < batch_.size(); ++i) {
    total += forward_example(spec_, params, batch_, i, ws, true);
    backward_example(spec_, params, ws, grad);
  }
  const double inv_n = 1.0 / static_cast<double>(batch_.size());
  for (double& g : grad) g *= inv_n;
  return total * inv_n;
}

double loss(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  return MlpObjective(spec, batch).loss(params.span());
}

ParamVector gradient(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  return gradient(MlpObjective(spec, batch), params);
}

ParamVector gradient(const Objective& objective, const ParamVector& params) {
  std::vector<double> g(objective.dim(), 0.0);
  objective.loss_and_gradient(params.span(), g);
  return ParamVector(std::move(g));
}

ParamVector hvp(const Objective& objective, const ParamVector& params, const ParamVector& v,
                double eps) {
  require_same_length("hvp direction", params.size(), v.size());
  if (!(eps > 0.0)) throw InvalidArgument("hvp eps must be positive");
  const double v_norm = norm(v);
  if (!(v_norm > 0.0)) throw ZeroDirectionError("hvp: direction has zero norm");

  const double rms = norm(params) / std::sqrt(static_cast<double>(std::max<std::size_t>(1, params.size())));
  const double h = std::exp2(std::floor(std::log2(eps * std::max(1.0, rms))));

  const std::size_t n = params.size();
  std::vector<double> plus(n), minus(n), g_plus(n), g_minus(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = h * (v[i] / v_norm);
    plus[i] = params[i] + step;
    minus[i] = params[i] - step;
  }
  objective.loss_and_gradient(plus, g_plus);
  objective.loss_and_gradient(minus, g_minus);
  std::vector<double> out(n);
  const double scale = v_norm / (2.0 * h);
  for (std::size_t i = 0; i < n; ++i) out[i] = (g_plus[i] - g_minus[i]) * scale;
  return ParamVector(std::move(out));
}

ParamVector hvp(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                const ParamVector& v, double eps) {
  return hvp(MlpObjective(spec, batch), params, v, eps);
}

LossProbe::LossProbe(std::shared_ptr<const Objective> objective, ParamVector base,
                     ParamVector delta, std::string loss_id)
    : objective_(std::move(objective)),
      base_(std::move(base)),
      delta_(std::move(delta)),
      loss_id_(std::move(loss_id)) {
  if (!objective_) throw InvalidArgument("probe needs an objective");
  require_same_length("probe base params", objective_->dim(), base_.size());
  require_same_length("probe delta", base_.size(), delta_.size());
  delta_.check_finite("probe delta");
  scratch_.resize(base_.size());
  base_loss_ = objective_->loss(base_.span());
  ++evaluations_;
  if (!std::isfinite(base_loss_)) throw NonFiniteError("probe base loss");
}

double LossProbe::eval(double eta) {
  for (std::size_t i = 0; i < scratch_.size(); ++i) scratch_[i] = base_[i] - eta * delta_[i];
  ++evaluations_;
  try {
    const double value = objective_->loss(scratch_);
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
  } catch (const NonFiniteError&) {
    return std::numeric_limits<double>::infinity();
  }
}

LossProbe make_probe(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                     const ParamVector& delta, std::string loss_id) {
  return LossProbe(std::make_shared<MlpObjective>(spec, batch), params, delta, std::move(loss_id));
}

LossProbe make_probe(std::shared_ptr<const Objective> objective, const ParamVector& params,
                     const ParamVector& delta, std::string loss_id) {
  return LossProbe(std::move(objective), params, delta, std::move(loss_id));
}

}  // namespace sharpline
