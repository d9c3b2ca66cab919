#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sharpline {

// Flat, ordered vector of trainable parameters (or anything living in
// parameter space: gradients, update directions, moments).
//
// Length is fixed at construction. Entries are validated finite whenever a
// ParamVector is built from outside data or produced by arithmetic here; a
// NaN/Inf raises NonFiniteError instead of propagating silently.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values);

  static ParamVector zeros(std::size_t n);
  static ParamVector filled(std::size_t n, double value);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> span() const noexcept { return values_; }
  std::span<double> span() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  // Throws NonFiniteError naming `what` if any entry is NaN/Inf.
  void check_finite(const std::string& what) const;
  bool all_zero() const noexcept;

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double s);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double s, ParamVector a);

// Sequential (fixed-order) reductions.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
inline double dot(const ParamVector& a, const ParamVector& b) { return dot(a.span(), b.span()); }
inline double norm(const ParamVector& a) { return norm(a.span()); }

// Throws LengthMismatch when sizes differ.
void require_same_length(const std::string& what, std::size_t expected, std::size_t got);

}  // namespace sharpline
