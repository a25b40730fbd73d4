#include "interaction/parameters.hpp"

#include <cmath>
#include <stdexcept>

#include "interaction/random.hpp"

namespace interaction {

Var ParameterStore::create(const std::string& name, int rows, int cols, Init init) {
  for (const auto& e : entries_)
    if (e.name == name) throw std::logic_error("duplicate parameter name: " + name);
  Matrix m(rows, cols);
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      std::fill(m.data.begin(), m.data.end(), 1.0);
      break;
    case Init::xavier_uniform: {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (double& v : m.data) v = (2.0 * unit_uniform(rng_) - 1.0) * bound;
      break;
    }
    case Init::embedding_normal:
      for (double& v : m.data) v = 0.02 * standard_normal(rng_);
      break;
  }
  entries_.push_back({name, Var::parameter(std::move(m))});
  return entries_.back().var;
}

const Var& ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  throw std::out_of_range("unknown parameter: " + name);
}

std::size_t ParameterStore::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

std::size_t ParameterStore::count_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.name.rfind(prefix, 0) == 0) n += e.var.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

Var RunState::maybe_dropout(const Var& x) const {
  if (!training || dropout <= 0.0 || rng == nullptr) return x;
  return ag::dropout(x, dropout, *rng);
}

Affine::Affine(ParameterStore& store, const std::string& name, int in, int out, Init init)
    : weight(store.create(name + ".weight", in, out, init)),
      bias(store.create(name + ".bias", 1, out, Init::zeros)) {}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, int width)
    : gamma(store.create(name + ".gamma", 1, width, Init::ones)),
      beta(store.create(name + ".beta", 1, width, Init::zeros)) {}

}  // namespace interaction
