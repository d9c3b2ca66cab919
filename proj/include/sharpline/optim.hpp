#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "sharpline/model.hpp"
#include "sharpline/param_vector.hpp"

namespace sharpline::optim {

enum class Kind { gd, sgd_momentum, adam, adamw };

std::string to_string(Kind k);
Kind parse_kind(const std::string& s);
inline bool is_adaptive(Kind k) { return k == Kind::adam || k == Kind::adamw; }

// Weight decay is coupled (added to the gradient) for gd, sgd-momentum and
// adam, and decoupled for adamw.
struct Config {
  Kind kind = Kind::gd;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

// m, v and the number of completed steps t. Moments are unused (empty) for
// plain gd.
struct State {
  ParamVector m;
  ParamVector v;
  std::uint64_t t = 0;

  friend bool operator==(const State&, const State&) = default;
};

State init_state(const Config& config, std::size_t n);

// The applied step is exactly params' = params - lr * delta.
struct UpdateDirection {
  ParamVector delta;
  bool includes_decay = false;
};

struct StepResult {
  ParamVector params;
  State state;
  UpdateDirection direction;
};

// One optimizer step.
//   gd:            delta = g + wd*theta
//   sgd-momentum:  m' = b1 m + (1-b1)(g + wd*theta), delta = m'
//   adam:          g~ = g + wd*theta, m' and v' from g~, delta = P^-1 m'
//   adamw:         m' and v' from g, delta = P^-1 m' + wd*theta
// where P is preconditioner(config, state') below.
StepResult step(const Config& config, const State& state, const ParamVector& params,
                const ParamVector& grad);

// Diagonal of Adam's pre-conditioner for the moments held in `state`:
//   P = (1 - b1^t) [ sqrt(v / (1 - b2^t)) + eps ]
// with t = state.t, the number of completed steps, so P^-1 m reproduces the
// adaptive part of the step that produced `state` exactly.
// Throws UnsupportedOptimizerError for gd/sgd-momentum and InvalidArgument
// when t == 0.
ParamVector preconditioner(const Config& config, const State& state);

// The direction the next step would take for gradient `grad` without
// committing it (state and params are not modified).
UpdateDirection peek_direction(const Config& config, const State& state, const ParamVector& params,
                               const ParamVector& grad);

// P^-1 g with P built from the moments after absorbing `grad`; the
// momentum-free counterpart of the Adam direction.
ParamVector preconditioned_gradient(const Config& config, const State& state,
                                    const ParamVector& grad);

// Accumulates `steps` gradients into the moments with parameters frozen.
// `next_batch(k)` supplies the k-th batch of the stream.
State warmup_moments(const Config& config, State state, const ParamVector& params,
                     const ModelSpec& spec, const std::function<Batch(std::size_t)>& next_batch,
                     std::size_t steps);

// Same, for a generic gradient source.
State warmup_moments(const Config& config, State state,
                     const std::function<ParamVector(std::size_t)>& next_grad, std::size_t steps);

}  // namespace sharpline::optim
