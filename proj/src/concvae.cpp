#include "interaction/concvae.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "interaction/classifiers.hpp"
#include "interaction/random.hpp"

namespace interaction {

std::vector<double> LatentGaussian::stddev() const {
  std::vector<double> s(log_std.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_std[i]);
  return s;
}

std::vector<double> reparameterize(const LatentGaussian& g, std::span<const double> eps) {
  if (g.mean.size() != g.log_std.size() || eps.size() != g.mean.size())
    throw std::invalid_argument("reparameterize: dimension mismatch");
  std::vector<double> z(eps.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mean[i] + std::exp(g.log_std[i]) * eps[i];
  return z;
}

double kl_divergence(const LatentGaussian& q, const LatentGaussian& p) {
  if (q.dim() != p.dim() || q.log_std.size() != q.mean.size() ||
      p.log_std.size() != p.mean.size())
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  double kl = 0.0;
  for (int i = 0; i < q.dim(); ++i) {
    const double var_q = std::exp(2.0 * q.log_std[i]);
    const double var_p = std::exp(2.0 * p.log_std[i]);
    const double d = q.mean[i] - p.mean[i];
    kl += 0.5 * ((var_q + d * d) / var_p - 1.0 + 2.0 * (p.log_std[i] - q.log_std[i]));
  }
  return kl;
}

LatentGaussian GaussianVars::value() const {
  return {mean.value().data, log_std.value().data};
}

Var reparameterize(const GaussianVars& g, const Matrix& eps) {
  if (!eps.same_shape(g.mean.value())) throw std::invalid_argument("reparameterize: eps shape");
  return ag::add(g.mean, ag::mul(ag::exp(g.log_std), Var::constant(eps)));
}

Var kl_divergence(const GaussianVars& q, const GaussianVars& p) {
  if (!q.mean.value().same_shape(p.mean.value()))
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  // 0.5 * sum[(var_q + (mu_q - mu_p)^2) / var_p - 1 + 2 (log_std_p - log_std_q)]
  const Var inv_var_p = ag::exp(ag::scale(p.log_std, -2.0));
  const Var var_q = ag::exp(ag::scale(q.log_std, 2.0));
  const Var diff = ag::sub(q.mean, p.mean);
  const Var ratio = ag::mul(ag::add(var_q, ag::mul(diff, diff)), inv_var_p);
  const Var log_term = ag::scale(ag::sub(p.log_std, q.log_std), 2.0);
  return ag::scale(ag::sum(ag::add_scalar(ag::add(ratio, log_term), -1.0)), 0.5);
}

std::string_view pooling_kind_name(PoolingKind kind) {
  return kind == PoolingKind::concoder ? "concoder" : "bos";
}

PoolingKind parse_pooling_kind(std::string_view name) {
  if (name == "concoder") return PoolingKind::concoder;
  if (name == "bos" || name == "bos_position") return PoolingKind::bos;
  throw std::invalid_argument("unknown pooling kind: " + std::string(name));
}

std::string_view reconstruction_name(Reconstruction r) {
  return r == Reconstruction::sum ? "sum" : "token_mean";
}

Reconstruction parse_reconstruction(std::string_view name) {
  if (name == "sum") return Reconstruction::sum;
  if (name == "token_mean") return Reconstruction::token_mean;
  throw std::invalid_argument("unknown reconstruction mode: " + std::string(name));
}

Var elbo_objective(const Var& reconstruction, const Var& kl, double beta, double free_bits) {
  if (beta == 0.0) return reconstruction;
  if (kl.item() < free_bits) return ag::add_scalar(reconstruction, beta * free_bits);
  return ag::add(reconstruction, ag::scale(kl, beta));
}

Concoder::Concoder(ParameterStore& store, const std::string& name, int hidden, int channels)
    : hidden_(hidden) {
  for (std::size_t i = 0; i < kWidths.size(); ++i) {
    const int w = kWidths[i];
    filters_[i] = Affine(store, name + ".conv" + std::to_string(w), w * hidden, channels);
  }
  projection_ = Affine(store, name + ".projection", 3 * channels, hidden);
}

Var Concoder::padded(const Var& states) const {
  const int widest = kWidths.back();
  if (states.rows() >= widest) return states;
  return ag::concat_rows({Var::constant(Matrix(widest - states.rows(), states.cols())), states});
}

Var Concoder::pooled(const Var& states, int width_index) const {
  if (states.cols() != hidden_) throw std::invalid_argument("concoder: width mismatch");
  const Var x = padded(states);
  const int w = kWidths.at(width_index);
  const int windows = x.rows() - w + 1;
  Var stacked;
  if (w == 1) {
    stacked = x;
  } else {
    std::vector<Var> shifted;
    for (int j = 0; j < w; ++j) shifted.push_back(ag::slice_rows(x, j, windows));
    stacked = ag::concat_cols(shifted);
  }
  return ag::max_rows(filters_[width_index](stacked));
}

Var Concoder::operator()(const Var& states) const {
  std::vector<Var> parts;
  for (int i = 0; i < static_cast<int>(kWidths.size()); ++i) parts.push_back(pooled(states, i));
  return projection_(ag::concat_cols(parts));
}

ConCvae::ConCvae(ParameterStore& store, const ModelConfig& config, const CvaeConfig& cvae)
    : config_(config), cvae_(cvae), latent_dim_(cvae.latent_dim > 0 ? cvae.latent_dim : config.hidden) {
  config.validate();
  if (cvae.beta < 0.0) throw std::invalid_argument("cvae.beta must be >= 0");
  encoder_ = Encoder(store, "encoder", config);
  if (cvae.pooling == PoolingKind::concoder)
    concoder_ = Concoder(store, "concoder", config.hidden, config.hidden);
  prior_mean_ = Affine(store, "prior.mean", config.hidden, latent_dim_);
  prior_log_std_ = Affine(store, "prior.log_std", config.hidden, latent_dim_);
  posterior_mean_ = Affine(store, "posterior.mean", 2 * config.hidden, latent_dim_);
  posterior_log_std_ = Affine(store, "posterior.log_std", 2 * config.hidden, latent_dim_);
  if (latent_dim_ != config.hidden)
    latent_projection_ = Affine(store, "latent_projection", latent_dim_, config.hidden);
  decoder_ = Decoder(store, "decoder", config);
}

SequenceStates ConCvae::encode_input(std::span<const int> premise,
                                     std::span<const int> hypothesis, const RunState& run) const {
  std::vector<int> segments;
  const auto ids = concat_pair(premise, hypothesis, &segments);
  return encoder_(ids, segments, run);
}

SequenceStates ConCvae::encode_explanation(std::span<const int> explanation,
                                           const RunState& run) const {
  return encoder_(explanation, {0}, run);
}

Var ConCvae::pool(const SequenceStates& states) const {
  if (cvae_.pooling == PoolingKind::concoder) return concoder_(states.values);
  return ag::slice_rows(states.values, 0, 1);
}

GaussianVars ConCvae::prior(const Var& x_pooled) const {
  return {prior_mean_(x_pooled), ag::tanh(prior_log_std_(x_pooled))};
}

GaussianVars ConCvae::posterior(const Var& x_pooled, const Var& y_pooled) const {
  const Var joint = ag::concat_cols({x_pooled, y_pooled});
  return {posterior_mean_(joint), ag::tanh(posterior_log_std_(joint))};
}

SequenceStates ConCvae::latent_memory(const Var& z, const SequenceStates& x_states) const {
  if (z.rows() != 1 || z.cols() != latent_dim_)
    throw std::invalid_argument("latent_memory: z must be 1 x latent_dim");
  const Var z_row = latent_dim_ == config_.hidden ? z : latent_projection_(z);
  SequenceStates mem;
  mem.values = ag::concat_rows({z_row, x_states.values});
  mem.mask.reserve(x_states.mask.size() + 1);
  mem.mask.push_back(1);
  mem.mask.insert(mem.mask.end(), x_states.mask.begin(), x_states.mask.end());
  mem.segment_starts = {0};
  return mem;
}

ConCvae::ExampleElbo ConCvae::example_elbo(const Example& ex, std::size_t reference,
                                           const RunState& run, const NoiseSource& noise) const {
  ExampleElbo out;
  out.x_states = encode_input(ex.premise, ex.hypothesis, run);
  const auto& target = ex.explanations.at(reference);
  out.y_states = encode_explanation(target, run);
  const Var x_c = pool(out.x_states);
  const Var y_c = pool(out.y_states);
  const GaussianVars p = prior(x_c);
  const GaussianVars q = posterior(x_c, y_c);

  Matrix eps(1, latent_dim_, 0.0);
  if (noise) {
    eps = noise(latent_dim_);
  } else if (run.training && run.rng) {
    for (double& e : eps.data) e = standard_normal(*run.rng);
  }
  const Var z = reparameterize(q, eps);
  auto loss = teacher_forced_loss(decoder_, target, latent_memory(z, out.x_states), run);
  out.nll = cvae_.reconstruction == Reconstruction::token_mean
                ? ag::scale(loss.total, 1.0 / static_cast<double>(std::max(1, loss.tokens)))
                : loss.total;
  out.tokens = loss.tokens;
  out.kl = kl_divergence(q, p);
  return out;
}

ElboTerms ConCvae::elbo_loss(std::span<const Example> batch, const RunState& run, double beta,
                             const NoiseSource& noise) const {
  if (batch.empty()) throw std::invalid_argument("elbo_loss: empty batch");
  const std::size_t refs = batch.front().explanations.size();
  if (refs == 0) throw std::invalid_argument("elbo_loss: batch has no explanations");
  Var nll, kl;
  int tokens = 0;
  for (const auto& ex : batch) {
    for (std::size_t r = 0; r < refs; ++r) {
      auto e = example_elbo(ex, r, run, noise);
      nll = nll.defined() ? ag::add(nll, e.nll) : e.nll;
      kl = kl.defined() ? ag::add(kl, e.kl) : e.kl;
      tokens += e.tokens;
    }
  }
  const double norm = 1.0 / static_cast<double>(batch.size() * refs);
  ElboTerms terms;
  terms.reconstruction = ag::scale(nll, norm);
  terms.kl = ag::scale(kl, norm);
  terms.objective = elbo_objective(terms.reconstruction, terms.kl, beta, cvae_.free_bits);
  terms.tokens = tokens;
  return terms;
}

std::vector<int> ConCvae::decode_with_latent(std::span<const double> z,
                                             const SequenceStates& x_states, int max_len) const {
  if (static_cast<int>(z.size()) != latent_dim_)
    throw std::invalid_argument("decode_with_latent: z dimension mismatch");
  NoGradGuard no_grad;
  const Var zv = Var::constant(Matrix(1, latent_dim_, std::vector<double>(z.begin(), z.end())));
  return greedy_decode(decoder_, latent_memory(zv, x_states), max_len);
}

LatentGaussian ConCvae::prior_of(std::span<const int> premise,
                                 std::span<const int> hypothesis) const {
  NoGradGuard no_grad;
  const RunState eval;
  return prior(pool(encode_input(premise, hypothesis, eval))).value();
}

LatentGaussian ConCvae::posterior_of(std::span<const int> premise,
                                     std::span<const int> hypothesis,
                                     std::span<const int> explanation) const {
  NoGradGuard no_grad;
  const RunState eval;
  const Var x_c = pool(encode_input(premise, hypothesis, eval));
  const Var y_c = pool(encode_explanation(explanation, eval));
  return posterior(x_c, y_c).value();
}

std::vector<double> ConCvae::reference_log_probs(std::span<const int> premise,
                                                 std::span<const int> hypothesis,
                                                 std::span<const int> target,
                                                 std::span<const double> z) const {
  NoGradGuard no_grad;
  const RunState eval;
  const auto x_states = encode_input(premise, hypothesis, eval);
  const Var zv = Var::constant(Matrix(1, latent_dim_, std::vector<double>(z.begin(), z.end())));
  const Var logits =
      decoder_.logits(target.first(target.size() - 1), latent_memory(zv, x_states), eval);
  return target_log_probs(logits.value(), target.subspan(1));
}

}  // namespace interaction
