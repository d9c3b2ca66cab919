#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sharpline/model.hpp"
#include "sharpline/param_vector.hpp"

namespace sharpline::quadratic {

// L(theta) = 1/2 sum_i lambda_i theta_i^2 + sum_i g_i theta_i + c, written in
// the Hessian eigenbasis so H = diag(lambda).
class QuadraticProblem final : public Objective {
 public:
  QuadraticProblem(std::vector<double> eigenvalues, std::vector<double> offset, double constant = 0.0);
  explicit QuadraticProblem(std::vector<double> eigenvalues);

  std::size_t dim() const override { return eigenvalues_.size(); }
  double loss(std::span<const double> params) const override;
  double loss_and_gradient(std::span<const double> params, std::span<double> grad) const override;

  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& offset() const { return offset_; }
  double constant() const { return constant_; }

  ParamVector hessian_times(const ParamVector& v) const;
  double max_eigenvalue() const;

 private:
  std::vector<double> eigenvalues_;
  std::vector<double> offset_;
  double constant_;
};

// Largest Hessian eigenvalue GD with coupled weight decay tolerates:
// 2/eta - gamma. Throws InvalidArgument for eta <= 0.
double gd_wd_threshold(double eta, double gamma);

// Largest pre-conditioned sharpness AdamW tolerates under a frozen
// pre-conditioner: (2/eta - gamma)(1 + beta1)/(1 - beta1).
double adamw_threshold(double eta, double gamma, double beta1);

// Asymptotic stability of q_{t+1} + p1 q_t + p2 q_{t-1} = c:
// 1 + p1 + p2 > 0, 1 - p1 + p2 > 0 and 1 - p2 > 0, all strict.
bool stability_predicate(double p1, double p2);

struct TrajectoryVerdict {
  bool diverged = false;
  std::size_t steps_simulated = 0;
  // |q| of the last iterate(s): one entry for GD, the last two for AdamW.
  std::vector<double> final_magnitudes;
  // Geometric mean of |q_{t+1}/q_t| over the last quarter of the run.
  double growth_ratio = 0.0;
};

inline constexpr std::size_t kDefaultStepBudget = 10'000;
inline constexpr double kDivergenceCeiling = 1e12;
inline constexpr double kGenericInitOffset = 1e-3;

// q_{t+1} = (1 - eta*gamma - eta*lambda) q_t. Diverged once |q| exceeds
// 1e12 * |q0| (or overflows).
TrajectoryVerdict simulate_gd_wd(double lambda, double eta, double gamma,
                                 std::size_t steps = kDefaultStepBudget, double q0 = 1.0);

// Homogeneous AdamW recursion with the pre-conditioner held fixed:
//   q_{t+1} = [1 - eta*gamma + beta1 - eta(1 - beta1) lambda_ph] q_t
//             - beta1 (1 - eta*gamma) q_{t-1}
TrajectoryVerdict simulate_adamw_frozen(double lambda_ph, double eta, double gamma, double beta1,
                                        std::size_t steps = kDefaultStepBudget, double q0 = 1.0,
                                        double q1 = 1.0 + kGenericInitOffset);

// p1, p2 of the AdamW recursion in the form the stability predicate takes.
struct RecursionCoefficients {
  double p1;
  double p2;
};
RecursionCoefficients adamw_coefficients(double lambda_ph, double eta, double gamma, double beta1);

enum class Simulator { gd_wd, adamw_frozen };
enum class SearchVariable { eta, lambda };

struct SimulationArgs {
  double lambda = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double beta1 = 0.0;
  std::size_t steps = kDefaultStepBudget;
  double q0 = 1.0;
  double q1 = 1.0 + kGenericInitOffset;
};

TrajectoryVerdict simulate(Simulator sim, const SimulationArgs& args);

// Bisects `variable` over [lo, hi] on the diverged/converged verdict until
// the bracket is within `tol` relative. Throws NoBoundaryError when both ends
// give the same verdict.
double empirical_boundary(Simulator sim, SimulationArgs fixed, SearchVariable variable, double lo,
                          double hi, double tol);

}  // namespace sharpline::quadratic
