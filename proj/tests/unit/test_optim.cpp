#include <cmath>
#include <vector>

#include "doctest.h"
#include "sharpline/errors.hpp"
#include "sharpline/optim.hpp"
#include "sharpline/quadratic.hpp"
#include "sharpline/rng.hpp"
#include "unit/test_util.hpp"

using namespace sharpline;
using namespace sharpline::optim;

namespace {

ParamVector random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return ParamVector(std::move(v));
}

Config make(Kind kind, double lr, double wd = 0.0, double b1 = 0.9, double b2 = 0.99) {
  Config c;
  c.kind = kind;
  c.lr = lr;
  c.weight_decay = wd;
  c.beta1 = b1;
  c.beta2 = b2;
  c.eps = 1e-8;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  Config c = make(Kind::adam, 0.1);
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = make(Kind::gd, 0.0);
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(parse_kind("adamw") == Kind::adamw);
  CHECK_THROWS_AS(parse_kind("lion"), InvalidArgument);
}

TEST_CASE("gd without decay: delta = g and params' = params - lr g") {
  const Config c = make(Kind::gd, 0.1);
  const ParamVector theta{1.0, -2.0};
  const ParamVector g{0.5, 0.25};
  const StepResult r = step(c, init_state(c, 2), theta, g);
  CHECK(r.direction.delta == g);
  CHECK_FALSE(r.direction.includes_decay);
  CHECK(r.params[0] == 1.0 - 0.1 * 0.5);
  CHECK(r.params[1] == -2.0 - 0.1 * 0.25);
  CHECK(r.state.t == 1);
}

TEST_CASE("two gd steps with a constant gradient move params by 2 lr g") {
  const Config c = make(Kind::gd, 0.125);
  const ParamVector theta{1.0, 3.0};
  const ParamVector g{0.5, -1.0};
  const StepResult a = step(c, init_state(c, 2), theta, g);
  const StepResult b = step(c, a.state, a.params, g);
  CHECK(b.params[0] == doctest::Approx(1.0 - 2 * 0.125 * 0.5));
  CHECK(b.params[1] == doctest::Approx(3.0 + 2 * 0.125));
}

TEST_CASE("gd with coupled decay: delta = g + wd theta") {
  const Config c = make(Kind::gd, 0.1, 0.5);
  const ParamVector theta{2.0, -4.0};
  const ParamVector g{1.0, 1.0};
  const StepResult r = step(c, init_state(c, 2), theta, g);
  CHECK(r.direction.delta == ParamVector{2.0, -1.0});
  CHECK(r.direction.includes_decay);
}

TEST_CASE("adamw first step from zero moments") {
  const Config c = make(Kind::adamw, 1e-3, 0.0, 0.9, 0.99);
  const ParamVector theta{0.5, -0.5, 2.0};
  const ParamVector g{0.3, -2.0, 1e-3};
  const StepResult r = step(c, init_state(c, 3), theta, g);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.state.m[i] == doctest::Approx((1 - 0.9) * g[i]));
    CHECK(r.state.v[i] == doctest::Approx((1 - 0.99) * g[i] * g[i]));
    // One bias-corrected step normalizes the gradient: g / (|g| + eps).
    CHECK(r.direction.delta[i] == doctest::Approx(g[i] / (std::abs(g[i]) + 1e-8)).epsilon(1e-12));
    CHECK(std::signbit(r.direction.delta[i]) == std::signbit(g[i]));
  }
  CHECK(r.direction.includes_decay);
}

TEST_CASE("adamw decoupled decay adds wd theta to the direction") {
  const Config c = make(Kind::adamw, 1e-2, 0.1);
  const Config c0 = make(Kind::adamw, 1e-2, 0.0);
  const ParamVector theta{0.5, -0.5};
  const ParamVector g{0.3, -2.0};
  const StepResult with = step(c, init_state(c, 2), theta, g);
  const StepResult without = step(c0, init_state(c0, 2), theta, g);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(with.direction.delta[i] == doctest::Approx(without.direction.delta[i] + 0.1 * theta[i]));
  }
}

TEST_CASE("direction consistency is bitwise for every optimizer") {
  for (Kind kind : {Kind::gd, Kind::sgd_momentum, Kind::adam, Kind::adamw}) {
    const Config c = make(kind, 0.03, 0.01);
    ParamVector theta = random_vector(17, 1);
    State s = init_state(c, theta.size());
    for (int t = 0; t < 10; ++t) {
      const ParamVector g = random_vector(theta.size(), 100 + t);
      const StepResult r = step(c, s, theta, g);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        CHECK(r.params[i] == theta[i] - c.lr * r.direction.delta[i]);
      }
      theta = r.params;
      s = r.state;
    }
  }
}

TEST_CASE("preconditioner formula and errors") {
  const Config c = make(Kind::adam, 1e-3, 0.0, 0.9, 0.99);
  State s = init_state(c, 3);
  CHECK_THROWS_AS(preconditioner(c, s), InvalidArgument);
  s.t = 1;
  const ParamVector p0 = preconditioner(c, s);
  for (double x : p0) CHECK(x == doctest::Approx((1 - 0.9) * 1e-8));

  const ParamVector g{0.3, -2.0, 0.0};
  const StepResult r = step(c, init_state(c, 3), ParamVector::zeros(3), g);
  const ParamVector p = preconditioner(c, r.state);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p[i] == doctest::Approx((1 - 0.9) * (std::abs(g[i]) + 1e-8)).epsilon(1e-12));
    CHECK(r.direction.delta[i] == r.state.m[i] / p[i]);
  }

  const Config gd = make(Kind::gd, 0.1);
  CHECK_THROWS_AS(preconditioner(gd, s), UnsupportedOptimizerError);
}

TEST_CASE("preconditioner entries stay above (1 - beta1^t) eps") {
  const Config c = make(Kind::adamw, 1e-3, 0.1, 0.9, 0.95);
  ParamVector theta = random_vector(11, 3);
  State s = init_state(c, theta.size());
  for (int t = 0; t < 30; ++t) {
    const StepResult r = step(c, s, theta, random_vector(theta.size(), 50 + t, t % 3 == 0 ? 0.0 : 1.0));
    theta = r.params;
    s = r.state;
    const ParamVector p = preconditioner(c, s);
    const double floor = (1 - std::pow(0.9, static_cast<double>(s.t))) * c.eps;
    for (double x : p) CHECK(x >= floor * (1 - 1e-15));
  }
}

TEST_CASE("adam with beta1 = beta2 = 0 normalizes each coordinate") {
  const Config c = make(Kind::adam, 0.1, 0.0, 0.0, 0.0);
  ParamVector theta = random_vector(20, 9);
  State s = init_state(c, theta.size());
  for (int t = 0; t < 4; ++t) {
    const ParamVector g = random_vector(theta.size(), 70 + t);
    const StepResult r = step(c, s, theta, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(r.direction.delta[i] == doctest::Approx(g[i] / (std::abs(g[i]) + c.eps)).epsilon(1e-14));
    }
    theta = r.params;
    s = r.state;
  }
}

TEST_CASE("1-D quadratic: gd+wd and adamw follow the hand recursions for 5 steps") {
  const double lambda = 3.0, eta = 0.1, gamma = 0.2, offset = 0.7;
  const quadratic::QuadraticProblem q({lambda}, {offset});

  SUBCASE("gd with coupled decay") {
    const Config c = make(Kind::gd, eta, gamma);
    ParamVector theta{1.5};
    State s = init_state(c, 1);
    double hand = 1.5;
    for (int t = 0; t < 5; ++t) {
      const StepResult r = step(c, s, theta, gradient(q, theta));
      hand = (1 - eta * gamma) * hand - eta * (lambda * hand + offset);
      CHECK(r.params[0] == doctest::Approx(hand).epsilon(1e-14));
      theta = r.params;
      s = r.state;
    }
  }

  SUBCASE("adamw with decoupled decay") {
    const double b1 = 0.9, b2 = 0.99, eps = 1e-8;
    const Config c = make(Kind::adamw, eta, gamma, b1, b2);
    ParamVector theta{1.5};
    State s = init_state(c, 1);
    double th = 1.5, m = 0, v = 0;
    for (int t = 1; t <= 5; ++t) {
      const StepResult r = step(c, s, theta, gradient(q, theta));
      const double g = lambda * th + offset;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double P = (1 - std::pow(b1, t)) * (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
      th = (1 - eta * gamma) * th - eta * m / P;
      CHECK(r.params[0] == doctest::Approx(th).epsilon(1e-12));
      theta = r.params;
      s = r.state;
    }
  }
}

TEST_CASE("step rejects non-finite gradients and mismatched lengths") {
  const Config c = make(Kind::gd, 0.1);
  ParamVector bad{1.0};
  bad[0] = NAN;
  CHECK_THROWS_AS(step(c, init_state(c, 1), ParamVector{1.0}, bad), NonFiniteError);
  CHECK_THROWS_AS(step(c, init_state(c, 1), ParamVector{1.0}, ParamVector{1.0, 2.0}), LengthMismatch);
}

TEST_CASE("peek_direction matches the committed step and leaves state alone") {
  const Config c = make(Kind::adamw, 1e-3, 0.1);
  const ParamVector theta = random_vector(5, 2);
  const ParamVector g = random_vector(5, 3);
  const State s = init_state(c, 5);
  const UpdateDirection d = peek_direction(c, s, theta, g);
  const StepResult r = step(c, s, theta, g);
  CHECK(d.delta == r.direction.delta);
}

TEST_CASE("warm-up: zero steps leave state unchanged; constant gradient converges") {
  const Config c = make(Kind::adam, 1e-3, 0.0, 0.9, 0.99);
  const State s0 = init_state(c, 3);
  const ParamVector g{0.5, -1.0, 2.0};
  CHECK(warmup_moments(c, s0, [&](std::size_t) { return g; }, 0) == s0);

  const State s = warmup_moments(c, s0, [&](std::size_t) { return g; }, 3000);
  CHECK(s.t == 3000);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s.m[i] == doctest::Approx(g[i]).epsilon(1e-9));
    CHECK(s.v[i] == doctest::Approx(g[i] * g[i]).epsilon(1e-9));
  }
  const Config gd = make(Kind::gd, 0.1);
  CHECK_THROWS_AS(warmup_moments(gd, init_state(gd, 3), [&](std::size_t) { return g; }, 1),
                  UnsupportedOptimizerError);
}

TEST_CASE("warm-up over 100 seeded MLP batches tracks the mean squared gradient") {
  ModelSpec spec;
  spec.widths = {6, 10, 3};
  spec.head = OutputHead::cross_entropy;
  const ParamVector theta = spec.init_params();
  const Config c = make(Kind::adam, 1e-3, 0.0, 0.9, 0.99);
  auto batch_at = [&](std::size_t k) { return testutil::random_batch(spec, 256, 500 + k); };
  const State s = warmup_moments(c, init_state(c, theta.size()), theta, spec, batch_at, 100);
  CHECK(s.t == 100);

  std::vector<double> mean_sq(theta.size(), 0.0);
  for (std::size_t k = 0; k < 100; ++k) {
    const ParamVector g = gradient(theta, spec, batch_at(k));
    for (std::size_t i = 0; i < g.size(); ++i) mean_sq[i] += g[i] * g[i] / 100.0;
  }
  // Compare the bias-corrected second moment with the direct average; the
  // parameters must not have moved.
  const double correction = 1.0 - std::pow(0.99, 100.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    INFO("coordinate " << i);
    CHECK(testutil::rel_close(s.v[i] / correction, mean_sq[i], 0.10, 1e-12));
  }
}
