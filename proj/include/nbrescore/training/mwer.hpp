#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace nbrescore::training {

// Softmax of -v with max subtraction.
inline std::vector<double> posterior(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("posterior: empty score vector");
  double lo = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("posterior: non-finite score");
    lo = std::min(lo, x);
  }
  std::vector<double> p(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[i] = std::exp(-(v[i] - lo));
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

// Sum_i (eps_i - mean(eps)) * p_i.
inline double mwer_loss(std::span<const double> eps, std::span<const double> p) {
  if (eps.size() != p.size()) throw std::invalid_argument("mwer_loss: length mismatch");
  if (eps.empty()) throw std::invalid_argument("mwer_loss: empty input");
  double mean = 0.0;
  for (double e : eps) mean += e;
  mean /= static_cast<double>(eps.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) loss += (eps[i] - mean) * p[i];
  return loss;
}

// Analytic gradient of the loss with respect to the fused scores v.
inline std::vector<double> mwer_gradient_wrt_fused(std::span<const double> eps,
                                                   std::span<const double> p) {
  const double loss = mwer_loss(eps, p);
  double mean = 0.0;
  for (double e : eps) mean += e;
  mean /= static_cast<double>(eps.size());
  std::vector<double> g(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) g[i] = -p[i] * ((eps[i] - mean) - loss);
  return g;
}

}  // namespace nbrescore::training
