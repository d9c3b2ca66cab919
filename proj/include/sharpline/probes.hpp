#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sharpline/model.hpp"
#include "sharpline/param_vector.hpp"

namespace sharpline::probes {

// Interval believed to contain the critical learning rate.
struct Bracket {
  double eta_lower = 0.0;
  double eta_upper = 0.0;
  // Set when the exponential search hit its iteration cap; the bracket is
  // then [eta, eta] at the last trial step size.
  bool degenerate = false;

  double relative_width() const { return 1.0 - eta_lower / eta_upper; }
};

struct ProbeSettings {
  double eta0 = 1e-2;
  double epsilon = 1.0 / 16.0;
  std::size_t max_exponential_iters = 40;

  void validate() const;
};

struct SharpnessEstimate {
  double eta_c = 0.0;
  double lambda_c = 0.0;
  Bracket bracket;
  std::size_t forward_passes = 0;
  bool warm_started = false;
  // {L} for plain probes, {L1, L2} for relative ones.
  std::vector<std::string> loss_ids;

  bool degenerate() const { return bracket.degenerate; }
};

// Doubles (or halves) eta from settings.eta0 until the loss first rises above
// (or falls below) the base loss. One probe evaluation per iteration, at most
// max_exponential_iters in total. Throws ZeroDirectionError for delta = 0.
Bracket exponential_search(LossProbe& probe, const ProbeSettings& settings);

// Bisects until 1 - lower/upper < epsilon. A midpoint whose loss is strictly
// greater than the base loss becomes the new upper end; ties move the lower
// end. Degenerate brackets are returned unchanged.
Bracket binary_search(LossProbe& probe, Bracket bracket, const ProbeSettings& settings);

// Exponential then binary search; eta_c is the midpoint of the final bracket
// and lambda_c = 2 / eta_c. forward_passes counts the base-loss evaluation
// plus every trial step.
SharpnessEstimate critical_lr(LossProbe& probe, const ProbeSettings& settings);

// Keeps eta0 at the previous probe's eta_c across calls.
class WarmStartedProber {
 public:
  explicit WarmStartedProber(ProbeSettings settings) : settings_(settings) {}
  SharpnessEstimate probe(LossProbe& probe);
  // Relative variant; labelled {probe's loss id, l2_id}.
  SharpnessEstimate probe_relative(LossProbe& probe_l1, const std::string& l2_id);
  const ProbeSettings& settings() const { return settings_; }

 private:
  ProbeSettings settings_;
  bool warm_ = false;
};

// Relative critical learning rate: `probe_l1` evaluates L1 along a direction
// derived from L2. Same search as critical_lr; the estimate is labelled
// {L1, L2}.
SharpnessEstimate relative_critical_lr(LossProbe& probe_l1, const ProbeSettings& settings,
                                       const std::string& l2_id);

inline constexpr double kDenominatorFloor = 1e-30;

// delta' H delta / delta' g. Throws DegenerateDenominatorError when
// |delta' g| < 1e-30.
double directional_sharpness(const ParamVector& grad, const ParamVector& delta,
                             const ParamVector& h_delta);

using LinearOperator = std::function<ParamVector(const ParamVector&)>;

struct Eigenpair {
  double lambda = 0.0;
  ParamVector vector;
  std::size_t iterations = 0;
  bool converged = false;
};

struct PowerSettings {
  double tol = 1e-4;
  std::size_t max_iter = 200;
  std::uint64_t seed = 0;
};

// Power iteration from a seeded uniform random unit vector. lambda is the
// Rayleigh quotient of the iterate. Stops when the residual |Av - lambda v|
// falls below tol * |lambda|, or when successive estimates differ by less
// than tol (relative) and the residual is below sqrt(tol) * |lambda|.
Eigenpair power_iteration(const LinearOperator& op, std::size_t dim, const PowerSettings& settings);

// Top eigenvalue of P^-1/2 H P^-1/2 for a diagonal P. Throws
// InvalidArgument if any entry of P is not strictly positive.
Eigenpair preconditioned_sharpness(const LinearOperator& hvp_fn, const ParamVector& precond,
                                   const PowerSettings& settings);

// Hessian sharpness of an objective at `params` via FD Hessian-vector
// products.
Eigenpair hessian_sharpness(const Objective& objective, const ParamVector& params,
                            const PowerSettings& settings, double hvp_eps = kDefaultHvpEps);

}  // namespace sharpline::probes
