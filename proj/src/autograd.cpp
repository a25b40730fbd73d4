#include "interaction/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "interaction/kernels.hpp"

namespace interaction {

using detail::Node;

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

Matrix::Matrix(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(r) * c)
    throw std::invalid_argument("Matrix: value count does not match shape");
}

Matrix& Node::grad_buffer() {
  if (grad.data.empty()) grad = Matrix(value.rows, value.cols, 0.0);
  return grad;
}

Var Var::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

double Var::item() const {
  if (node_->value.size() != 1) throw std::logic_error("Var::item on a non-scalar");
  return node_->value.data[0];
}

void Var::zero_grad() { node_->grad = Matrix(); }

namespace {

thread_local bool t_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;
using Backward = std::function<void(Node&)>;

Var make_result(Matrix value, std::vector<NodePtr> parents, Backward fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (t_grad_enabled) {
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
    if (needs) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backward = std::move(fn);
    }
  }
  return Var(std::move(n));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Applies `f(i)` to every element index; `f` receives the flat index.
template <typename F>
void each(std::size_t n, F&& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void backward(const Var& loss) {
  if (loss.value().size() != 1) throw std::logic_error("backward: loss must be 1x1");
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.data.empty()) n->backward(*n);
  }
}

namespace ag {

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(m, n);
  kernels::matmul(a.value().data, b.value().data, out.data, m, k, n);
  return make_result(std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad)
      kernels::matmul_nt(self.grad.data, pb.value.data, pa.grad_buffer().data, m, n, k, true);
    if (pb.requires_grad)
      kernels::matmul_tn(pa.value.data, self.grad.data, pb.grad_buffer().data, k, m, n, true);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Matrix out(m, n);
  kernels::matmul_nt(a.value().data, b.value().data, out.data, m, k, n);
  return make_result(std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    // dA = dC * B, dB = dC^T * A
    if (pa.requires_grad)
      kernels::matmul(self.grad.data, pb.value.data, pa.grad_buffer().data, m, n, k, true);
    if (pb.requires_grad)
      kernels::matmul_tn(self.grad.data, pa.value.data, pb.grad_buffer().data, n, m, k, true);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows()) throw std::invalid_argument("linear: input width mismatch");
  if (bias.rows() != 1 || bias.cols() != weight.cols())
    throw std::invalid_argument("linear: bias shape mismatch");
  const int m = x.rows(), k = x.cols(), n = weight.cols();
  Matrix out(m, n);
  for (int i = 0; i < m; ++i)
    std::copy(bias.value().data.begin(), bias.value().data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(i) * n);
  kernels::matmul(x.value().data, weight.value().data, out.data, m, k, n, true);
  return make_result(std::move(out), {x.node(), weight.node(), bias.node()},
                     [m, k, n](Node& self) {
                       auto& px = *self.parents[0];
                       auto& pw = *self.parents[1];
                       auto& pb = *self.parents[2];
                       if (px.requires_grad)
                         kernels::matmul_nt(self.grad.data, pw.value.data,
                                            px.grad_buffer().data, m, n, k, true);
                       if (pw.requires_grad)
                         kernels::matmul_tn(px.value.data, self.grad.data,
                                            pw.grad_buffer().data, k, m, n, true);
                       if (pb.requires_grad) {
                         auto& gb = pb.grad_buffer().data;
                         for (int i = 0; i < m; ++i)
                           for (int j = 0; j < n; ++j)
                             gb[j] += self.grad.data[static_cast<std::size_t>(i) * n + j];
                       }
                     });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value();
  each(out.size(), [&](std::size_t i) { out.data[i] += b.value().data[i]; });
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer().data;
      each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i]; });
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value();
  each(out.size(), [&](std::size_t i) { out.data[i] -= b.value().data[i]; });
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data;
      each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i]; });
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer().data;
      each(g.size(), [&](std::size_t i) { g[i] -= self.grad.data[i]; });
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value();
  each(out.size(), [&](std::size_t i) { out.data[i] *= b.value().data[i]; });
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data;
      each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i] * pb.value.data[i]; });
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer().data;
      each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i] * pa.value.data[i]; });
    }
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  return make_result(std::move(out), {a.node()}, [s](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    each(g.size(), [&](std::size_t i) { g[i] += s * self.grad.data[i]; });
  });
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v += s;
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i]; });
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row: row shape mismatch");
  const int m = a.rows(), n = a.cols();
  Matrix out = a.value();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out(i, j) += row.value().data[j];
  return make_result(std::move(out), {a.node(), row.node()}, [m, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pr = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data;
      each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i]; });
    }
    if (pr.requires_grad) {
      auto& g = pr.grad_buffer().data;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) g[j] += self.grad(i, j);
    }
  });
}

Var relu(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer().data;
    each(g.size(), [&](std::size_t i) {
      if (p.value.data[i] > 0.0) g[i] += self.grad.data[i];
    });
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::tanh(v);
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    each(g.size(), [&](std::size_t i) {
      const double y = self.value.data[i];
      g[i] += self.grad.data[i] * (1.0 - y * y);
    });
  });
}

Var exp(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::exp(v);
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    each(g.size(), [&](std::size_t i) { g[i] += self.grad.data[i] * self.value.data[i]; });
  });
}

Var abs(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::fabs(v);
  return make_result(std::move(out), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer().data;
    each(g.size(), [&](std::size_t i) {
      const double x = p.value.data[i];
      g[i] += self.grad.data[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
    });
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int m = x.rows(), n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
    throw std::invalid_argument("layer_norm: affine shape mismatch");
  auto normalized = std::make_shared<Matrix>(m, n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  Matrix out(m, n);
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += x.value()(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = x.value()(i, j) - mu;
      var += d * d;
    }
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < n; ++j) {
      const double h = (x.value()(i, j) - mu) * is;
      (*normalized)(i, j) = h;
      out(i, j) = h * gamma.value().data[j] + beta.value().data[j];
    }
  }
  return make_result(std::move(out), {x.node(), gamma.node(), beta.node()},
                     [m, n, normalized, inv_std](Node& self) {
                       auto& px = *self.parents[0];
                       auto& pg = *self.parents[1];
                       auto& pb = *self.parents[2];
                       const auto& xh = *normalized;
                       if (pg.requires_grad) {
                         auto& g = pg.grad_buffer().data;
                         for (int i = 0; i < m; ++i)
                           for (int j = 0; j < n; ++j) g[j] += self.grad(i, j) * xh(i, j);
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.grad_buffer().data;
                         for (int i = 0; i < m; ++i)
                           for (int j = 0; j < n; ++j) g[j] += self.grad(i, j);
                       }
                       if (px.requires_grad) {
                         auto& gx = px.grad_buffer();
                         std::vector<double> dxh(n);
                         for (int i = 0; i < m; ++i) {
                           double mean_d = 0.0, mean_dx = 0.0;
                           for (int j = 0; j < n; ++j) {
                             dxh[j] = self.grad(i, j) * pg.value.data[j];
                             mean_d += dxh[j];
                             mean_dx += dxh[j] * xh(i, j);
                           }
                           mean_d /= n;
                           mean_dx /= n;
                           for (int j = 0; j < n; ++j)
                             gx(i, j) += (*inv_std)[i] * (dxh[j] - mean_d - xh(i, j) * mean_dx);
                         }
                       }
                     });
}

Var softmax_rows(const Var& x, const Matrix* additive_mask) {
  const int m = x.rows(), n = x.cols();
  if (additive_mask && !additive_mask->same_shape(x.value()))
    throw std::invalid_argument("softmax_rows: mask shape mismatch");
  Matrix out(m, n);
  kernels::softmax_rows(x.value().data,
                        additive_mask ? std::span<const double>(additive_mask->data)
                                      : std::span<const double>(),
                        out.data, m, n);
  return make_result(std::move(out), {x.node()}, [m, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += self.grad(i, j) * self.value(i, j);
      for (int j = 0; j < n; ++j) g(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
    }
  });
}

Var slice_rows(const Var& x, int start, int count) {
  if (start < 0 || count < 0 || start + count > x.rows())
    throw std::out_of_range("slice_rows: range outside matrix");
  const int n = x.cols();
  Matrix out(count, n);
  std::copy_n(x.value().data.begin() + static_cast<std::ptrdiff_t>(start) * n,
              static_cast<std::size_t>(count) * n, out.data.begin());
  return make_result(std::move(out), {x.node()}, [start, count, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    const std::size_t off = static_cast<std::size_t>(start) * n;
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * n; ++i)
      g[off + i] += self.grad.data[i];
  });
}

Var slice_cols(const Var& x, int start, int count) {
  if (start < 0 || count < 0 || start + count > x.cols())
    throw std::out_of_range("slice_cols: range outside matrix");
  const int m = x.rows();
  Matrix out(m, count);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < count; ++j) out(i, j) = x.value()(i, start + j);
  return make_result(std::move(out), {x.node()}, [m, start, count](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < count; ++j) g(i, start + j) += self.grad(i, j);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int n = parts.front().cols();
  int total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) throw std::invalid_argument("concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, n);
  std::vector<NodePtr> nodes;
  std::vector<int> offsets;
  int r = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(r) * n);
    offsets.push_back(r);
    nodes.push_back(p.node());
    r += p.rows();
  }
  return make_result(std::move(out), std::move(nodes), [offsets, n](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer().data;
      const std::size_t off = static_cast<std::size_t>(offsets[k]) * n;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[off + i];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int m = parts.front().rows();
  int total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(m, total);
  std::vector<NodePtr> nodes;
  std::vector<int> offsets;
  int c = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p.cols(); ++j) out(i, c + j) = p.value()(i, j);
    offsets.push_back(c);
    nodes.push_back(p.node());
    c += p.cols();
  }
  return make_result(std::move(out), std::move(nodes), [offsets, m](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < g.cols; ++j) g(i, j) += self.grad(i, offsets[k] + j);
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  const int n = table.cols();
  const int count = static_cast<int>(ids.size());
  Matrix out(count, n);
  for (int i = 0; i < count; ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::out_of_range("gather_rows: id out of range");
    const auto src = table.value().row(ids[i]);
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i) * n);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return make_result(std::move(out), {table.node()}, [rows, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < n; ++j) g(rows[i], j) += self.grad(static_cast<int>(i), j);
  });
}

Var max_rows(const Var& x) {
  const int m = x.rows(), n = x.cols();
  if (m == 0) throw std::invalid_argument("max_rows: empty input");
  Matrix out(1, n);
  std::vector<int> arg(n, 0);
  for (int j = 0; j < n; ++j) {
    double best = x.value()(0, j);
    for (int i = 1; i < m; ++i) {
      if (x.value()(i, j) > best) {
        best = x.value()(i, j);
        arg[j] = i;
      }
    }
    out.data[j] = best;
  }
  return make_result(std::move(out), {x.node()}, [arg, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int j = 0; j < n; ++j) g(arg[j], j) += self.grad.data[j];
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  return make_result(Matrix(1, 1, s), {x.node()}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    const double d = self.grad.data[0];
    for (double& v : g) v += d;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var cross_entropy_sum(const Var& logits, std::span<const int> targets) {
  const int m = logits.rows(), n = logits.cols();
  if (static_cast<int>(targets.size()) != m)
    throw std::invalid_argument("cross_entropy_sum: target count mismatch");
  auto probs = std::make_shared<Matrix>(m, n);
  kernels::softmax_rows(logits.value().data, {}, probs->data, m, n);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto row = logits.value().row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double se = 0.0;
    for (double v : row) se += std::exp(v - mx);
    total += (mx + std::log(se)) - row[targets[i]];
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(Matrix(1, 1, total), {logits.node()}, [probs, tgt, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const double d = self.grad.data[0];
    for (std::size_t i = 0; i < tgt.size(); ++i) {
      const int r = static_cast<int>(i);
      for (int j = 0; j < n; ++j) g(r, j) += d * (*probs)(r, j);
      g(r, tgt[i]) -= d;
    }
  });
}

Var dropout(const Var& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  const double keep = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  for (double& v : *mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = u < p ? 0.0 : keep;
  }
  Matrix out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= (*mask)[i];
  return make_result(std::move(out), {x.node()}, [mask](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] * (*mask)[i];
  });
}

}  // namespace ag

std::vector<double> target_log_probs(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<int>(targets.size()) != logits.rows)
    throw std::invalid_argument("target_log_probs: target count mismatch");
  std::vector<double> out(targets.size());
  for (int i = 0; i < logits.rows; ++i) {
    const auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double se = 0.0;
    for (double v : row) se += std::exp(v - mx);
    out[i] = row[targets[i]] - (mx + std::log(se));
  }
  return out;
}

}  // namespace interaction
