#include "sharpline/optim.hpp"

#include <cmath>

#include "sharpline/errors.hpp"

namespace sharpline::optim {

namespace {

void require_state(const Config& config, const State& state, std::size_t n) {
  if (config.kind == Kind::gd) return;
  require_same_length("optimizer first moment", n, state.m.size());
  if (is_adaptive(config.kind)) require_same_length("optimizer second moment", n, state.v.size());
}

// Absorbs `grad` into the moments; returns the post-update state.
State accumulate(const Config& config, const State& state, std::span<const double> grad) {
  State next = state;
  const std::size_t n = grad.size();
  if (config.kind != Kind::gd) {
    for (std::size_t i = 0; i < n; ++i) {
      next.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    }
  }
  if (is_adaptive(config.kind)) {
    for (std::size_t i = 0; i < n; ++i) {
      next.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    }
  }
  next.t = state.t + 1;
  return next;
}

std::vector<double> effective_gradient(const Config& config, const ParamVector& params,
                                       const ParamVector& grad) {
  std::vector<double> g(grad.begin(), grad.end());
  if (config.kind != Kind::adamw && config.weight_decay != 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += config.weight_decay * params[i];
  }
  return g;
}

UpdateDirection direction_from(const Config& config, const State& next, const ParamVector& params,
                               std::span<const double> g) {
  const std::size_t n = params.size();
  std::vector<double> delta(n);
  const bool includes_decay = config.kind == Kind::adamw || config.weight_decay != 0.0;
  switch (config.kind) {
    case Kind::gd:
      for (std::size_t i = 0; i < n; ++i) delta[i] = g[i];
      break;
    case Kind::sgd_momentum:
      for (std::size_t i = 0; i < n; ++i) delta[i] = next.m[i];
      break;
    case Kind::adam:
    case Kind::adamw: {
      const ParamVector p = preconditioner(config, next);
      for (std::size_t i = 0; i < n; ++i) delta[i] = next.m[i] / p[i];
      if (config.kind == Kind::adamw) {
        for (std::size_t i = 0; i < n; ++i) delta[i] += config.weight_decay * params[i];
      }
      break;
    }
  }
  UpdateDirection dir{ParamVector(std::move(delta)), includes_decay};
  return dir;
}

}  // namespace

std::string to_string(Kind k) {
  switch (k) {
    case Kind::gd: return "gd";
    case Kind::sgd_momentum: return "sgd-momentum";
    case Kind::adam: return "adam";
    case Kind::adamw: return "adamw";
  }
  return "?";
}

Kind parse_kind(const std::string& s) {
  if (s == "gd" || s == "sgd") return Kind::gd;
  if (s == "sgd-momentum") return Kind::sgd_momentum;
  if (s == "adam") return Kind::adam;
  if (s == "adamw") return Kind::adamw;
  throw InvalidArgument("unknown optimizer '" + s + "'");
}

void Config::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidArgument("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight decay must be nonnegative");
}

State init_state(const Config& config, std::size_t n) {
  State s;
  if (config.kind != Kind::gd) s.m = ParamVector::zeros(n);
  if (is_adaptive(config.kind)) s.v = ParamVector::zeros(n);
  return s;
}

ParamVector preconditioner(const Config& config, const State& state) {
  if (!is_adaptive(config.kind)) {
    throw UnsupportedOptimizerError("pre-conditioner is only defined for adam/adamw, not " +
                                    to_string(config.kind));
  }
  if (state.t == 0) throw InvalidArgument("pre-conditioner needs at least one accumulated step");
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  std::vector<double> p(state.v.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = c1 * (std::sqrt(state.v[i] / c2) + config.eps);
  }
  return ParamVector(std::move(p));
}

StepResult step(const Config& config, const State& state, const ParamVector& params,
                const ParamVector& grad) {
  config.validate();
  require_same_length("gradient", params.size(), grad.size());
  require_state(config, state, params.size());
  grad.check_finite("gradient");

  const std::vector<double> g = effective_gradient(config, params, grad);
  State next = accumulate(config, state, g);
  UpdateDirection dir = direction_from(config, next, params, g);

  std::vector<double> updated(params.size());
  for (std::size_t i = 0; i < updated.size(); ++i) updated[i] = params[i] - config.lr * dir.delta[i];
  return StepResult{ParamVector(std::move(updated)), std::move(next), std::move(dir)};
}

UpdateDirection peek_direction(const Config& config, const State& state, const ParamVector& params,
                               const ParamVector& grad) {
  config.validate();
  require_same_length("gradient", params.size(), grad.size());
  require_state(config, state, params.size());
  grad.check_finite("gradient");
  const std::vector<double> g = effective_gradient(config, params, grad);
  const State next = accumulate(config, state, g);
  return direction_from(config, next, params, g);
}

ParamVector preconditioned_gradient(const Config& config, const State& state,
                                    const ParamVector& grad) {
  require_state(config, state, grad.size());
  grad.check_finite("gradient");
  const State next = accumulate(config, state, grad.span());
  const ParamVector p = preconditioner(config, next);
  std::vector<double> out(grad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad[i] / p[i];
  return ParamVector(std::move(out));
}

State warmup_moments(const Config& config, State state,
                     const std::function<ParamVector(std::size_t)>& next_grad, std::size_t steps) {
  if (!is_adaptive(config.kind)) {
    throw UnsupportedOptimizerError("moment warm-up needs an adaptive optimizer");
  }
  config.validate();
  for (std::size_t k = 0; k < steps; ++k) {
    const ParamVector g = next_grad(k);
    require_same_length("warm-up gradient", state.v.size(), g.size());
    g.check_finite("warm-up gradient");
    state = accumulate(config, state, g.span());
  }
  return state;
}

State warmup_moments(const Config& config, State state, const ParamVector& params,
                     const ModelSpec& spec, const std::function<Batch(std::size_t)>& next_batch,
                     std::size_t steps) {
  // Coupled decay (adam) sees the same frozen params every step.
  return warmup_moments(
      config, std::move(state),
      [&](std::size_t k) {
        ParamVector g = gradient(params, spec, next_batch(k));
        if (config.kind == Kind::adam && config.weight_decay != 0.0) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += config.weight_decay * params[i];
        }
        return g;
      },
      steps);
}

}  // namespace sharpline::optim
