#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "interaction/autograd.hpp"

namespace interaction {

enum class Init { zeros, ones, xavier_uniform, embedding_normal };

struct NamedParameter {
  std::string name;
  Var var;
};

// Owns every trainable array of one model, in declaration order. The order
// is part of the checkpoint format.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : rng_(seed) {}

  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Var create(const std::string& name, int rows, int cols, Init init);

  const std::vector<NamedParameter>& entries() const { return entries_; }
  const Var& get(const std::string& name) const;
  std::size_t count() const;
  std::size_t count_with_prefix(const std::string& prefix) const;
  void zero_grad();

 private:
  std::mt19937_64 rng_;
  std::vector<NamedParameter> entries_;
};

// Training-time state threaded through forward passes. A default-constructed
// state is evaluation mode.
struct RunState {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Var maybe_dropout(const Var& x) const;
};

struct Affine {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Affine() = default;
  Affine(ParameterStore& store, const std::string& name, int in, int out,
         Init init = Init::xavier_uniform);
  Var operator()(const Var& x) const { return ag::linear(x, weight, bias); }
  int in() const { return weight.rows(); }
  int out() const { return weight.cols(); }
};

struct LayerNorm {
  Var gamma;
  Var beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, int width);
  Var operator()(const Var& x) const { return ag::layer_norm(x, gamma, beta); }
};

}  // namespace interaction
