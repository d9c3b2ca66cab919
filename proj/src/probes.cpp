#include "sharpline/probes.hpp"

#include <cmath>

#include "sharpline/errors.hpp"
#include "sharpline/rng.hpp"

namespace sharpline::probes {

namespace {

// Scale-aware slack for the binary-search exit test so that a bracket whose
// relative width is epsilon up to rounding still counts as "not yet within".
constexpr double kExitSlack = 1e-9;

SharpnessEstimate finish(const Bracket& bracket, std::size_t passes, bool warm,
                         std::vector<std::string> ids) {
  SharpnessEstimate est;
  est.bracket = bracket;
  est.eta_c = 0.5 * (bracket.eta_lower + bracket.eta_upper);
  est.lambda_c = 2.0 / est.eta_c;
  est.forward_passes = passes;
  est.warm_started = warm;
  est.loss_ids = std::move(ids);
  return est;
}

}  // namespace

void ProbeSettings::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw InvalidArgument("eta0 must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  if (max_exponential_iters < 1) throw InvalidArgument("exponential cap must be >= 1");
}

Bracket exponential_search(LossProbe& probe, const ProbeSettings& settings) {
  settings.validate();
  if (probe.delta().all_zero()) {
    throw ZeroDirectionError("update direction is zero; the loss can never increase");
  }
  const double base = probe.base_loss();
  double eta = settings.eta0;
  std::size_t i = 1;
  const bool grow = probe.eval(eta) < base;
  while (i < settings.max_exponential_iters) {
    eta = grow ? eta * 2.0 : eta * 0.5;
    const double trial = probe.eval(eta);
    ++i;
    if (grow && trial > base) return Bracket{eta / 2.0, eta, false};
    if (!grow && trial < base) return Bracket{eta, eta * 2.0, false};
  }
  return Bracket{eta, eta, true};
}

Bracket binary_search(LossProbe& probe, Bracket bracket, const ProbeSettings& settings) {
  settings.validate();
  if (bracket.degenerate || !(bracket.eta_lower < bracket.eta_upper)) return bracket;
  const double base = probe.base_loss();
  const double threshold = settings.epsilon * (1.0 - kExitSlack);
  while (bracket.relative_width() >= threshold) {
    const double mid = 0.5 * (bracket.eta_lower + bracket.eta_upper);
    if (probe.eval(mid) > base) {
      bracket.eta_upper = mid;
    } else {
      bracket.eta_lower = mid;
    }
  }
  return bracket;
}

SharpnessEstimate critical_lr(LossProbe& probe, const ProbeSettings& settings) {
  const std::size_t before = probe.evaluations();
  const Bracket coarse = exponential_search(probe, settings);
  const Bracket fine = binary_search(probe, coarse, settings);
  // The base loss was evaluated when the probe was built.
  const std::size_t passes = 1 + (probe.evaluations() - before);
  return finish(fine, passes, false, {probe.loss_id()});
}

SharpnessEstimate WarmStartedProber::probe(LossProbe& probe) {
  SharpnessEstimate est = critical_lr(probe, settings_);
  est.warm_started = warm_;
  if (!est.degenerate()) {
    settings_.eta0 = est.eta_c;
    warm_ = true;
  }
  return est;
}

SharpnessEstimate WarmStartedProber::probe_relative(LossProbe& probe_l1, const std::string& l2_id) {
  SharpnessEstimate est = probe(probe_l1);
  est.loss_ids = {probe_l1.loss_id(), l2_id};
  return est;
}

SharpnessEstimate relative_critical_lr(LossProbe& probe_l1, const ProbeSettings& settings,
                                       const std::string& l2_id) {
  SharpnessEstimate est = critical_lr(probe_l1, settings);
  est.loss_ids = {probe_l1.loss_id(), l2_id};
  return est;
}

double directional_sharpness(const ParamVector& grad, const ParamVector& delta,
                             const ParamVector& h_delta) {
  require_same_length("directional sharpness delta", grad.size(), delta.size());
  require_same_length("directional sharpness H*delta", grad.size(), h_delta.size());
  const double denom = dot(delta, grad);
  if (!(std::abs(denom) >= kDenominatorFloor)) {
    throw DegenerateDenominatorError("directional sharpness: |delta' g| = " +
                                     std::to_string(std::abs(denom)) + " is below 1e-30");
  }
  return dot(delta, h_delta) / denom;
}

Eigenpair power_iteration(const LinearOperator& op, std::size_t dim, const PowerSettings& settings) {
  if (dim < 1) throw InvalidArgument("power iteration needs dim >= 1");
  if (!(settings.tol > 0.0)) throw InvalidArgument("power iteration tol must be positive");
  Rng rng(settings.seed);
  std::vector<double> start(dim);
  for (double& x : start) x = rng.uniform(-1.0, 1.0);
  double n0 = norm(start);
  if (n0 == 0.0) {
    start[0] = 1.0;
    n0 = 1.0;
  }
  for (double& x : start) x /= n0;
  ParamVector v(std::move(start));

  Eigenpair out;
  double previous = 0.0;
  for (std::size_t it = 1; it <= settings.max_iter; ++it) {
    const ParamVector w = op(v);
    require_same_length("power iteration operator output", dim, w.size());
    const double lambda = dot(v, w);

    double residual = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double r = w[i] - lambda * v[i];
      residual += r * r;
    }
    residual = std::sqrt(residual);

    out.lambda = lambda;
    out.vector = v;
    out.iterations = it;

    const double scale = std::abs(lambda);
    // A stalled Rayleigh quotient alone is not enough (e.g. spectrum {1, -1}).
    const bool steady = it > 1 && std::abs(lambda - previous) < settings.tol * scale &&
                        residual <= std::sqrt(settings.tol) * scale;
    if (residual <= settings.tol * scale || steady) {
      out.converged = true;
      return out;
    }
    const double wn = norm(w);
    if (wn == 0.0) {
      // v lies in the null space; lambda = 0 is exact.
      out.converged = true;
      return out;
    }
    std::vector<double> next(dim);
    for (std::size_t i = 0; i < dim; ++i) next[i] = w[i] / wn;
    v = ParamVector(std::move(next));
    previous = lambda;
  }
  return out;
}

Eigenpair preconditioned_sharpness(const LinearOperator& hvp_fn, const ParamVector& precond,
                                   const PowerSettings& settings) {
  std::vector<double> inv_sqrt(precond.size());
  for (std::size_t i = 0; i < precond.size(); ++i) {
    if (!(precond[i] > 0.0)) {
      throw InvalidArgument("pre-conditioner entry " + std::to_string(i) + " is not positive");
    }
    inv_sqrt[i] = 1.0 / std::sqrt(precond[i]);
  }
  const LinearOperator op = [&](const ParamVector& v) {
    std::vector<double> scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = inv_sqrt[i] * v[i];
    ParamVector hv = hvp_fn(ParamVector(std::move(scaled)));
    require_same_length("hvp output", inv_sqrt.size(), hv.size());
    for (std::size_t i = 0; i < hv.size(); ++i) hv[i] *= inv_sqrt[i];
    return hv;
  };
  return power_iteration(op, precond.size(), settings);
}

Eigenpair hessian_sharpness(const Objective& objective, const ParamVector& params,
                            const PowerSettings& settings, double hvp_eps) {
  return power_iteration(
      [&](const ParamVector& v) { return hvp(objective, params, v, hvp_eps); }, params.size(),
      settings);
}

}  // namespace sharpline::probes
