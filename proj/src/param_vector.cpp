#include "sharpline/param_vector.hpp"

#include <algorithm>
#include <cmath>

#include "sharpline/errors.hpp"

namespace sharpline {

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  check_finite("parameter vector");
}

ParamVector::ParamVector(std::initializer_list<double> values) : values_(values) {
  check_finite("parameter vector");
}

ParamVector ParamVector::zeros(std::size_t n) { return filled(n, 0.0); }

ParamVector ParamVector::filled(std::size_t n, double value) {
  return ParamVector(std::vector<double>(n, value));
}

void ParamVector::check_finite(const std::string& what) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NonFiniteError(what + " (coordinate " + std::to_string(i) + ")");
    }
  }
}

bool ParamVector::all_zero() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return x == 0.0; });
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_length("ParamVector +=", size(), other.size());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  check_finite("ParamVector +=");
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_length("ParamVector -=", size(), other.size());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  check_finite("ParamVector -=");
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  for (double& x : values_) x *= s;
  check_finite("ParamVector *=");
  return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double s, ParamVector a) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length("dot", a.size(), b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void require_same_length(const std::string& what, std::size_t expected, std::size_t got) {
  if (expected != got) throw LengthMismatch(what, expected, got);
}

}  // namespace sharpline
