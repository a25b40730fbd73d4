#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "interaction/autograd.hpp"
#include "interaction/parameters.hpp"

namespace testing_support {

using interaction::Matrix;
using interaction::Var;

// ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||, floor)
// over sampled entries of one array.
struct GradError {
  double relative = 0.0;
  double analytic_norm = 0.0;
  int checked = 0;
  // Squared sums behind `relative`, kept so arrays can be pooled.
  double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
};

inline double relative_error(double diff_sq, double analytic_sq, double numeric_sq,
                             double floor = 1e-8) {
  return std::sqrt(diff_sq) / std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), floor});
}

// Central differences with step h on up to `per_array` entries of every
// named array. `loss` must be deterministic.
inline std::map<std::string, GradError> check_gradients(
    const std::vector<std::pair<std::string, Var>>& arrays, const std::function<Var()>& loss,
    double h = 1e-5, int per_array = 8, std::uint64_t seed = 3) {
  for (const auto& [name, v] : arrays) {
    Var p = v;
    p.zero_grad();
  }
  interaction::backward(loss());
  std::mt19937_64 rng(seed);
  std::map<std::string, GradError> out;
  for (const auto& [name, v] : arrays) {
    Var p = v;
    const Matrix& g = p.grad();
    const std::size_t n = p.value().size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (static_cast<int>(n) > per_array) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_array);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i : idx) {
      const double orig = p.value().data[i];
      p.mutable_value().data[i] = orig + h;
      const double up = loss().item();
      p.mutable_value().data[i] = orig - h;
      const double down = loss().item();
      p.mutable_value().data[i] = orig;
      const double num = (up - down) / (2.0 * h);
      const double ana = g.size() ? g.data[i] : 0.0;
      diff += (ana - num) * (ana - num);
      na += ana * ana;
      nn += num * num;
    }
    GradError e;
    e.analytic_norm = std::sqrt(na);
    e.relative = relative_error(diff, na, nn);
    e.diff_sq = diff;
    e.analytic_sq = na;
    e.numeric_sq = nn;
    e.checked = static_cast<int>(idx.size());
    out[name] = e;
  }
  return out;
}

// Pools per-array errors under the key returned by `group_of(name)`.
// Arrays whose true gradient is identically zero (a key-projection bias
// under softmax shift invariance) only have a meaningful error pooled with
// their weight matrix.
inline std::map<std::string, GradError> pool_errors(
    const std::map<std::string, GradError>& errors,
    const std::function<std::string(const std::string&)>& group_of) {
  std::map<std::string, GradError> out;
  for (const auto& [name, e] : errors) {
    GradError& g = out[group_of(name)];
    g.diff_sq += e.diff_sq;
    g.analytic_sq += e.analytic_sq;
    g.numeric_sq += e.numeric_sq;
    g.checked += e.checked;
  }
  for (auto& [name, g] : out) {
    g.relative = relative_error(g.diff_sq, g.analytic_sq, g.numeric_sq);
    g.analytic_norm = std::sqrt(g.analytic_sq);
  }
  return out;
}

// "a.b.weight" -> "a.b": an affine map's weight and bias form one group.
inline std::string affine_group(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

inline std::vector<std::pair<std::string, Var>> all_parameters(
    const interaction::ParameterStore& store) {
  std::vector<std::pair<std::string, Var>> out;
  for (const auto& e : store.entries()) out.emplace_back(e.name, e.var);
  return out;
}

}  // namespace testing_support
