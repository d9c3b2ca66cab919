#pragma once

// Straight-line scalar MLP used only as a test oracle. It shares no code with
// src/model.cpp: weights are unpacked into nested vectors and every quantity
// is computed with explicit loops in the textbook order.

#include <cmath>
#include <cstddef>
#include <vector>

#include "sharpline/model.hpp"

namespace reference {

using Mat = std::vector<std::vector<double>>;

struct Layer {
  Mat W;                  // out x in
  std::vector<double> b;  // out
};

inline std::vector<Layer> unpack(const sharpline::ModelSpec& spec, const std::vector<double>& p) {
  std::vector<Layer> layers;
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    Layer layer;
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    layer.W.assign(out, std::vector<double>(in));
    for (std::size_t r = 0; r < out; ++r)
      for (std::size_t c = 0; c < in; ++c) layer.W[r][c] = p[k++];
    layer.b.resize(out);
    for (std::size_t r = 0; r < out; ++r) layer.b[r] = p[k++];
    layers.push_back(layer);
  }
  return layers;
}

inline double act(sharpline::Activation a, double x) {
  if (a == sharpline::Activation::identity) return x;
  if (a == sharpline::Activation::relu) return x > 0 ? x : 0;
  const double pi = 3.14159265358979323846;
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

inline double dact(sharpline::Activation a, double x) {
  if (a == sharpline::Activation::identity) return 1.0;
  if (a == sharpline::Activation::relu) return x > 0 ? 1.0 : 0.0;
  const double pi = 3.14159265358979323846;
  const double k = std::sqrt(2.0 / pi);
  const double t = std::tanh(k * (x + 0.044715 * x * x * x));
  const double sech2 = 1.0 - t * t;
  return 0.5 * (1.0 + t) + 0.5 * x * sech2 * k * (1.0 + 3.0 * 0.044715 * x * x);
}

// Returns mean loss; fills `grad` (same layout as the library) if non-null.
inline double evaluate(const sharpline::ModelSpec& spec, const std::vector<double>& p,
                       const sharpline::Batch& batch, std::vector<double>* grad) {
  const auto layers = unpack(spec, p);
  const std::size_t L = layers.size();
  std::vector<Layer> g_layers = layers;
  for (auto& gl : g_layers) {
    for (auto& row : gl.W) for (double& x : row) x = 0;
    for (double& x : gl.b) x = 0;
  }
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    std::vector<std::vector<double>> a(L + 1), z(L);
    a[0].assign(batch.inputs.row(n).begin(), batch.inputs.row(n).end());
    for (std::size_t l = 0; l < L; ++l) {
      const auto& W = layers[l].W;
      z[l].assign(W.size(), 0.0);
      for (std::size_t r = 0; r < W.size(); ++r) {
        double s = layers[l].b[r];
        for (std::size_t c = 0; c < W[r].size(); ++c) s += W[r][c] * a[l][c];
        z[l][r] = s;
      }
      a[l + 1].resize(W.size());
      for (std::size_t r = 0; r < W.size(); ++r) {
        a[l + 1][r] = (l + 1 < L) ? act(spec.activation, z[l][r]) : z[l][r];
      }
    }
    const auto& y = a[L];
    std::vector<double> d(y.size());
    if (spec.head == sharpline::OutputHead::mse) {
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double e = y[j] - batch.targets(n, j);
        total += 0.5 * e * e;
        d[j] = e;
      }
    } else {
      double mx = y[0];
      for (double v : y) mx = std::max(mx, v);
      double s = 0;
      for (double v : y) s += std::exp(v - mx);
      const double lse = mx + std::log(s);
      const int label = batch.labels[n];
      total += lse - y[label];
      for (std::size_t j = 0; j < y.size(); ++j) d[j] = std::exp(y[j] - lse) - (static_cast<int>(j) == label ? 1.0 : 0.0);
    }
    if (!grad) continue;
    for (std::size_t l = L; l-- > 0;) {
      for (std::size_t r = 0; r < d.size(); ++r) {
        for (std::size_t c = 0; c < a[l].size(); ++c) g_layers[l].W[r][c] += d[r] * a[l][c];
        g_layers[l].b[r] += d[r];
      }
      if (l == 0) break;
      std::vector<double> dn(a[l].size(), 0.0);
      for (std::size_t c = 0; c < dn.size(); ++c) {
        for (std::size_t r = 0; r < d.size(); ++r) dn[c] += layers[l].W[r][c] * d[r];
        dn[c] *= dact(spec.activation, z[l - 1][c]);
      }
      d = dn;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (grad) {
    grad->clear();
    for (const auto& gl : g_layers) {
      for (const auto& row : gl.W) for (double x : row) grad->push_back(x * inv);
      for (double x : gl.b) grad->push_back(x * inv);
    }
  }
  return total * inv;
}

}  // namespace reference
