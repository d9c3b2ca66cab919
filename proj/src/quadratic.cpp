#include "sharpline/quadratic.hpp"

#include <algorithm>
#include <cmath>

#include "sharpline/errors.hpp"

namespace sharpline::quadratic {

namespace {

// Mean of log|q_{t+1}/q_t| over the last quarter of a stored log-magnitude
// history, exponentiated.
double growth_from_history(const std::vector<double>& log_mag) {
  if (log_mag.size() < 2) return 0.0;
  const std::size_t n = log_mag.size() - 1;
  const std::size_t span = std::max<std::size_t>(1, n / 4);
  const double a = log_mag[n - span];
  const double b = log_mag[n];
  if (std::isinf(a) || std::isinf(b)) return std::isinf(b) && b < 0 ? 0.0 : HUGE_VAL;
  return std::exp((b - a) / static_cast<double>(span));
}

double log_abs(double x) { return x == 0.0 ? -HUGE_VAL : std::log(std::abs(x)); }

}  // namespace

QuadraticProblem::QuadraticProblem(std::vector<double> eigenvalues, std::vector<double> offset,
                                   double constant)
    : eigenvalues_(std::move(eigenvalues)), offset_(std::move(offset)), constant_(constant) {
  if (eigenvalues_.empty()) throw InvalidArgument("quadratic problem needs dimension >= 1");
  require_same_length("quadratic offset", eigenvalues_.size(), offset_.size());
}

QuadraticProblem::QuadraticProblem(std::vector<double> eigenvalues)
    : QuadraticProblem(eigenvalues, std::vector<double>(eigenvalues.size(), 0.0), 0.0) {}

double QuadraticProblem::loss(std::span<const double> params) const {
  require_same_length("quadratic params", dim(), params.size());
  double acc = constant_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    acc += 0.5 * eigenvalues_[i] * params[i] * params[i] + offset_[i] * params[i];
  }
  return acc;
}

double QuadraticProblem::loss_and_gradient(std::span<const double> params,
                                           std::span<double> grad) const {
  require_same_length("quadratic gradient buffer", dim(), grad.size());
  for (std::size_t i = 0; i < params.size(); ++i) grad[i] = eigenvalues_[i] * params[i] + offset_[i];
  return loss(params);
}

ParamVector QuadraticProblem::hessian_times(const ParamVector& v) const {
  require_same_length("quadratic H*v", dim(), v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = eigenvalues_[i] * v[i];
  return ParamVector(std::move(out));
}

double QuadraticProblem::max_eigenvalue() const {
  return *std::max_element(eigenvalues_.begin(), eigenvalues_.end());
}

double gd_wd_threshold(double eta, double gamma) {
  if (!(eta > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(gamma >= 0.0)) throw InvalidArgument("weight decay must be nonnegative");
  return 2.0 / eta - gamma;
}

double adamw_threshold(double eta, double gamma, double beta1) {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidArgument("beta1 must lie in [0, 1)");
  return gd_wd_threshold(eta, gamma) * ((1.0 + beta1) / (1.0 - beta1));
}

bool stability_predicate(double p1, double p2) {
  return 1.0 + p1 + p2 > 0.0 && 1.0 - p1 + p2 > 0.0 && 1.0 - p2 > 0.0;
}

TrajectoryVerdict simulate_gd_wd(double lambda, double eta, double gamma, std::size_t steps,
                                 double q0) {
  if (steps < 1) throw InvalidArgument("simulation needs at least one step");
  const double factor = 1.0 - eta * gamma - eta * lambda;
  const double ceiling = kDivergenceCeiling * std::abs(q0);
  TrajectoryVerdict verdict;
  std::vector<double> log_mag{log_abs(q0)};
  log_mag.reserve(steps + 1);
  double q = q0;
  for (std::size_t t = 0; t < steps; ++t) {
    q = factor * q;
    log_mag.push_back(log_abs(q));
    verdict.steps_simulated = t + 1;
    if (!std::isfinite(q) || (q0 != 0.0 && std::abs(q) > ceiling)) {
      verdict.diverged = true;
      break;
    }
  }
  verdict.final_magnitudes = {std::abs(q)};
  verdict.growth_ratio = growth_from_history(log_mag);
  return verdict;
}

RecursionCoefficients adamw_coefficients(double lambda_ph, double eta, double gamma, double beta1) {
  const double decay = 1.0 - eta * gamma;
  return {-(decay + beta1 - eta * (1.0 - beta1) * lambda_ph), beta1 * decay};
}

TrajectoryVerdict simulate_adamw_frozen(double lambda_ph, double eta, double gamma, double beta1,
                                        std::size_t steps, double q0, double q1) {
  if (steps < 2) throw InvalidArgument("two-term recursion needs at least two steps");
  const auto [p1, p2] = adamw_coefficients(lambda_ph, eta, gamma, beta1);
  const double scale = std::max(std::abs(q0), std::abs(q1));
  const double ceiling = kDivergenceCeiling * scale;
  TrajectoryVerdict verdict;
  std::vector<double> log_mag{log_abs(q0), log_abs(q1)};
  log_mag.reserve(steps + 1);
  double prev = q0;
  double cur = q1;
  verdict.steps_simulated = 1;
  for (std::size_t t = 1; t < steps; ++t) {
    const double next = -p1 * cur - p2 * prev;
    prev = cur;
    cur = next;
    log_mag.push_back(log_abs(cur));
    verdict.steps_simulated = t + 1;
    if (!std::isfinite(cur) || (scale != 0.0 && std::abs(cur) > ceiling)) {
      verdict.diverged = true;
      break;
    }
  }
  verdict.final_magnitudes = {std::abs(prev), std::abs(cur)};
  verdict.growth_ratio = growth_from_history(log_mag);
  return verdict;
}

TrajectoryVerdict simulate(Simulator sim, const SimulationArgs& a) {
  switch (sim) {
    case Simulator::gd_wd:
      return simulate_gd_wd(a.lambda, a.eta, a.gamma, a.steps, a.q0);
    case Simulator::adamw_frozen:
      return simulate_adamw_frozen(a.lambda, a.eta, a.gamma, a.beta1, a.steps, a.q0, a.q1);
  }
  throw InvalidArgument("unknown simulator");
}

double empirical_boundary(Simulator sim, SimulationArgs fixed, SearchVariable variable, double lo,
                          double hi, double tol) {
  if (!(lo < hi)) throw InvalidArgument("boundary search needs lo < hi");
  if (!(tol > 0.0)) throw InvalidArgument("boundary search tol must be positive");
  auto diverges = [&](double x) {
    SimulationArgs args = fixed;
    (variable == SearchVariable::eta ? args.eta : args.lambda) = x;
    return simulate(sim, args).diverged;
  };
  const bool lo_div = diverges(lo);
  const bool hi_div = diverges(hi);
  if (lo_div == hi_div) {
    throw NoBoundaryError("same verdict (" + std::string(lo_div ? "diverged" : "converged") +
                          ") at both ends of [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  while (hi - lo > tol * std::abs(0.5 * (lo + hi))) {
    const double mid = 0.5 * (lo + hi);
    if (diverges(mid) == lo_div) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace sharpline::quadratic
