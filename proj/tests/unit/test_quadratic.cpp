#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "doctest.h"
#include "sharpline/errors.hpp"
#include "sharpline/probes.hpp"
#include "sharpline/quadratic.hpp"
#include "sharpline/rng.hpp"

using namespace sharpline;
using namespace sharpline::quadratic;

namespace {

// Spectral radius of the companion matrix of q_{t+1} + p1 q_t + p2 q_{t-1}.
double spectral_radius(double p1, double p2) {
  const std::complex<double> disc = std::sqrt(std::complex<double>(p1 * p1 - 4 * p2));
  const std::complex<double> r1 = (-p1 + disc) / 2.0, r2 = (-p1 - disc) / 2.0;
  return std::max(std::abs(r1), std::abs(r2));
}

}  // namespace

TEST_CASE("quadratic problem basics") {
  const QuadraticProblem q({2.0, 4.0}, {1.0, -1.0}, 0.5);
  const ParamVector theta{1.0, 2.0};
  // 0.5*(2*1 + 4*4) + (1 - 2) + 0.5
  CHECK(q.loss(theta.span()) == doctest::Approx(8.5));
  const ParamVector g = gradient(q, theta);
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 7.0);
  CHECK(q.max_eigenvalue() == 4.0);
  CHECK(q.hessian_times(ParamVector{1.0, 1.0}) == ParamVector{2.0, 4.0});
  CHECK_THROWS_AS(QuadraticProblem({1.0, 2.0}, {1.0}), LengthMismatch);
  CHECK_THROWS(QuadraticProblem(std::vector<double>{}));
}

TEST_CASE("gd_wd_threshold examples") {
  CHECK(gd_wd_threshold(0.01, 1.0) == doctest::Approx(199.0));
  CHECK(gd_wd_threshold(0.01, 0.0) == 200.0);
  CHECK(gd_wd_threshold(2.0, 1.0) == 0.0);
  CHECK(gd_wd_threshold(1.0, 5.0) == -3.0);
  CHECK_THROWS_AS(gd_wd_threshold(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(gd_wd_threshold(-1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(gd_wd_threshold(0.1, -1.0), InvalidArgument);
}

TEST_CASE("adamw_threshold examples") {
  CHECK(adamw_threshold(1e-3, 0.0, 0.9) == doctest::Approx(38000.0));
  CHECK(adamw_threshold(2.0, 1.0, 0.9) == 0.0);
  CHECK_THROWS_AS(adamw_threshold(0.1, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(adamw_threshold(0.1, 0.0, -0.1), InvalidArgument);
  CHECK_THROWS_AS(adamw_threshold(0.0, 0.0, 0.5), InvalidArgument);
}

TEST_CASE("adamw threshold with beta1 = 0 equals the GD threshold exactly") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double eta = std::exp(rng.uniform(-10.0, 1.0));
    const double gamma = rng.uniform(0.0, 10.0);
    CHECK(adamw_threshold(eta, gamma, 0.0) == gd_wd_threshold(eta, gamma));
  }
}

TEST_CASE("stability predicate examples") {
  CHECK(stability_predicate(-1.5, 0.6));
  CHECK_FALSE(stability_predicate(0.0, 1.1));
  CHECK_FALSE(stability_predicate(-2.0, 1.0));
  CHECK_FALSE(stability_predicate(2.0, 1.0));
  CHECK_FALSE(stability_predicate(0.0, 1.0));
  CHECK(stability_predicate(0.0, 0.0));
}

TEST_CASE("stability predicate agrees with the companion spectral radius") {
  Rng rng(6);
  int checked = 0;
  for (int i = 0; i < 20000; ++i) {
    const double p1 = rng.uniform(-3.0, 3.0), p2 = rng.uniform(-2.0, 2.0);
    const double rho = spectral_radius(p1, p2);
    if (std::abs(rho - 1.0) < 1e-9) continue;
    CHECK(stability_predicate(p1, p2) == (rho < 1.0));
    ++checked;
  }
  CHECK(checked > 19000);
}

TEST_CASE("simulate_gd_wd examples") {
  CHECK_FALSE(simulate_gd_wd(10.0, 0.19, 0.0).diverged);
  CHECK(simulate_gd_wd(10.0, 0.21, 0.0).diverged);
  const TrajectoryVerdict v = simulate_gd_wd(10.0, 0.21, 5.0);
  CHECK(v.diverged);
  // |1 - 0.21*15| = 2.15
  CHECK(v.growth_ratio == doctest::Approx(2.15));
  CHECK(v.steps_simulated < 100);
  CHECK(v.final_magnitudes.size() == 1);

  const TrajectoryVerdict c = simulate_gd_wd(10.0, 0.05, 0.0, 400, 3.0);
  CHECK_FALSE(c.diverged);
  CHECK(c.steps_simulated == 400);
  CHECK(c.growth_ratio == doctest::Approx(0.5));
  CHECK(c.final_magnitudes[0] == doctest::Approx(3.0 * std::pow(0.5, 400)).epsilon(1e-9));
  CHECK_THROWS_AS(simulate_gd_wd(10.0, 0.1, 0.0, 0), InvalidArgument);
}

TEST_CASE("simulate_gd_wd matches |1 - eta(lambda + gamma)| > 1 away from the boundary") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double lambda = std::exp(rng.uniform(-3.0, 5.0));
    const double gamma = rng.uniform(0.0, 2.0);
    const double factor = rng.uniform(0.0, 1.0) < 0.5 ? rng.uniform(0.2, 0.99) : rng.uniform(1.01, 3.0);
    const double eta = factor * 2.0 / (lambda + gamma);
    const double q0 = rng.uniform(0.0, 1.0) < 0.5 ? rng.normal() : 1.0;
    if (q0 == 0.0) continue;
    const bool unstable = std::abs(1.0 - eta * (lambda + gamma)) > 1.0;
    CHECK(simulate_gd_wd(lambda, eta, gamma, kDefaultStepBudget, q0).diverged == unstable);
  }
}

TEST_CASE("simulate_adamw_frozen around the threshold") {
  const double eta = 1e-3, gamma = 0.1, beta1 = 0.9;
  const double thr = adamw_threshold(eta, gamma, beta1);
  CHECK_FALSE(simulate_adamw_frozen(0.99 * thr, eta, gamma, beta1).diverged);
  CHECK(simulate_adamw_frozen(1.01 * thr, eta, gamma, beta1).diverged);
  CHECK(simulate_adamw_frozen(0.5 * thr, eta, gamma, beta1).final_magnitudes.size() == 2);
  CHECK_THROWS_AS(simulate_adamw_frozen(1.0, eta, gamma, beta1, 1), InvalidArgument);
}

TEST_CASE("simulate_adamw_frozen with beta1 = 0 reproduces the GD verdicts") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const double lambda = std::exp(rng.uniform(-3.0, 5.0));
    const double gamma = rng.uniform(0.0, 2.0);
    const double eta = rng.uniform(0.2, 3.0) * 2.0 / (lambda + gamma);
    if (std::abs(eta * (lambda + gamma) - 2.0) < 0.02) continue;
    CHECK(simulate_adamw_frozen(lambda, eta, gamma, 0.0).diverged == simulate_gd_wd(lambda, eta, gamma).diverged);
  }
}

TEST_CASE("predicate and frozen AdamW simulation agree on 1000 seeded tuples") {
  Rng rng(2025);
  int agreements = 0;
  for (int i = 0; i < 1000; ++i) {
    const double eta = std::exp(rng.uniform(std::log(1e-4), std::log(1e-1)));
    const double gamma = rng.uniform(0.0, 1.0);
    const double beta1 = rng.uniform(0.0, 0.99);
    const double thr = adamw_threshold(eta, gamma, beta1);
    const double factor = rng.uniform(0.0, 1.0) < 0.5 ? rng.uniform(0.05, 0.99) : rng.uniform(1.01, 3.0);
    const double lambda_ph = factor * thr;
    const auto [p1, p2] = adamw_coefficients(lambda_ph, eta, gamma, beta1);
    const bool stable = stability_predicate(p1, p2);
    const bool diverged = simulate_adamw_frozen(lambda_ph, eta, gamma, beta1).diverged;
    CHECK(stable != diverged);
    agreements += stable != diverged;
  }
  CHECK(agreements == 1000);
}

TEST_CASE("adamw coefficients") {
  const auto [p1, p2] = adamw_coefficients(100.0, 0.01, 0.5, 0.9);
  CHECK(p1 == doctest::Approx(-(1.0 - 0.005 + 0.9 - 0.01 * 0.1 * 100.0)));
  CHECK(p2 == doctest::Approx(0.9 * 0.995));
}

TEST_CASE("empirical boundary examples") {
  SimulationArgs gd;
  gd.lambda = 10.0;
  gd.steps = 200'000;
  CHECK(empirical_boundary(Simulator::gd_wd, gd, SearchVariable::eta, 0.1, 0.3, 1e-4) ==
        doctest::Approx(0.2).epsilon(1e-3));
  gd.gamma = 1.0;
  CHECK(empirical_boundary(Simulator::gd_wd, gd, SearchVariable::eta, 0.1, 0.3, 1e-4) ==
        doctest::Approx(2.0 / 11.0).epsilon(1e-3));

  SimulationArgs aw;
  aw.eta = 1e-3;
  aw.gamma = 0.1;
  aw.beta1 = 0.9;
  const double thr = adamw_threshold(aw.eta, aw.gamma, aw.beta1);
  CHECK(empirical_boundary(Simulator::adamw_frozen, aw, SearchVariable::lambda, 0.5 * thr, 2 * thr, 1e-4) ==
        doctest::Approx(thr).epsilon(1e-2));

  CHECK_THROWS_AS(empirical_boundary(Simulator::gd_wd, gd, SearchVariable::eta, 0.01, 0.02, 1e-4), NoBoundaryError);
  CHECK_THROWS_AS(empirical_boundary(Simulator::gd_wd, gd, SearchVariable::eta, 0.3, 0.1, 1e-4), InvalidArgument);
}

TEST_CASE("empirical GD boundary matches 2/(lambda + gamma) on a grid") {
  for (double lambda : {0.5, 3.0, 10.0, 80.0}) {
    for (double gamma : {0.0, 0.1, 1.0, 5.0}) {
      SimulationArgs a;
      a.lambda = lambda;
      a.gamma = gamma;
      a.steps = 200'000;
      const double exact = 2.0 / (lambda + gamma);
      const double got = empirical_boundary(Simulator::gd_wd, a, SearchVariable::eta, 0.5 * exact, 2 * exact, 1e-5);
      CHECK(std::abs(got - exact) / exact <= 1e-3);
    }
  }
}

TEST_CASE("empirical AdamW boundary matches the threshold on a grid") {
  for (double eta : {1e-4, 1e-3, 1e-2}) {
    for (double gamma : {0.0, 0.1}) {
      for (double beta1 : {0.0, 0.5, 0.9, 0.95}) {
        SimulationArgs a;
        a.eta = eta;
        a.gamma = gamma;
        a.beta1 = beta1;
        const double thr = adamw_threshold(eta, gamma, beta1);
        const double got =
            empirical_boundary(Simulator::adamw_frozen, a, SearchVariable::lambda, 0.5 * thr, 2 * thr, 1e-4);
        CHECK(std::abs(got - thr) / thr <= 1e-2);
      }
    }
  }
}

TEST_CASE("critical_lr on a quadratic reproduces 2/lambda_dir within tolerance") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> eig(n), off(n), theta(n);
    for (std::size_t i = 0; i < n; ++i) {
      eig[i] = std::exp(rng.uniform(-2.0, 4.0));
      off[i] = rng.normal();
      theta[i] = rng.normal();
    }
    auto q = std::make_shared<QuadraticProblem>(eig, off, 1.5);
    const ParamVector th(theta);
    const ParamVector g = gradient(*q, th);
    const double lambda_dir = probes::directional_sharpness(g, g, q->hessian_times(g));
    LossProbe probe = make_probe(q, th, g);
    const probes::SharpnessEstimate est = probes::critical_lr(probe, probes::ProbeSettings{});
    CHECK(est.bracket.eta_lower <= 2.0 / lambda_dir * (1 + 1e-12));
    CHECK(est.bracket.eta_upper >= 2.0 / lambda_dir * (1 - 1e-12));
    CHECK(std::abs(est.lambda_c - lambda_dir) / lambda_dir <= 1.0 / 16.0);
  }
}
