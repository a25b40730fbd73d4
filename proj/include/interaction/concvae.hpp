#pragma once

#include <array>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "interaction/corpus.hpp"
#include "interaction/parameters.hpp"
#include "interaction/transformer.hpp"

namespace interaction {

// Diagonal Gaussian over the latent space.
struct LatentGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;

  int dim() const { return static_cast<int>(mean.size()); }
  std::vector<double> stddev() const;
};

// z = mean + exp(log_std) * eps
std::vector<double> reparameterize(const LatentGaussian& g, std::span<const double> eps);

// KL(q || p) summed over dimensions, closed form.
double kl_divergence(const LatentGaussian& q, const LatentGaussian& p);

// Graph-side counterparts; every value is a 1 x d row.
struct GaussianVars {
  Var mean;
  Var log_std;

  LatentGaussian value() const;
};

Var reparameterize(const GaussianVars& g, const Matrix& eps);
Var kl_divergence(const GaussianVars& q, const GaussianVars& p);

enum class PoolingKind { concoder, bos };

// How one explanation's token NLLs collapse into the reconstruction term.
enum class Reconstruction { sum, token_mean };

std::string_view reconstruction_name(Reconstruction r);
Reconstruction parse_reconstruction(std::string_view name);

std::string_view pooling_kind_name(PoolingKind kind);
PoolingKind parse_pooling_kind(std::string_view name);

// Width-1/2/3 convolutions across positions (each filter spans the full
// hidden width), max-pooled over positions, concatenated and projected back
// to `hidden`: [L x hidden] -> [1 x hidden].
class Concoder {
 public:
  static constexpr std::array<int, 3> kWidths{1, 2, 3};

  Concoder() = default;
  Concoder(ParameterStore& store, const std::string& name, int hidden, int channels);

  Var operator()(const Var& states) const;
  // Max-pooled channels of the filter bank with the given width index.
  Var pooled(const Var& states, int width_index) const;

 private:
  Var padded(const Var& states) const;

  std::array<Affine, 3> filters_;
  Affine projection_;
  int hidden_ = 0;
};

struct CvaeConfig {
  PoolingKind pooling = PoolingKind::concoder;
  int latent_dim = 0;  // 0 = hidden
  double beta = 1.0;
  double kl_warmup_epochs = 1.0;
  Reconstruction reconstruction = Reconstruction::sum;
  // KL floor in nats: the objective charges beta * max(kl, free_bits), so
  // there is no pressure toward the prior below the floor.
  double free_bits = 0.0;
};

// reconstruction + beta * max(kl, free_bits); kl is the batch-mean KL.
Var elbo_objective(const Var& reconstruction, const Var& kl, double beta, double free_bits);

struct ElboTerms {
  Var reconstruction;  // mean per-sequence negative log-likelihood
  Var kl;              // mean KL(posterior || prior)
  Var objective;       // reconstruction + beta * kl
  int tokens = 0;
};

// Supplies the standard-normal noise for one example; defaults to the
// run's RNG when training and to zeros otherwise.
using NoiseSource = std::function<Matrix(int dim)>;

// Conditional VAE over explanations: shared transformer encoder for inputs
// and explanations, a pooling stage (Concoder or the <bos> state), affine
// Gaussian prior/posterior heads with tanh log-std, and a transformer
// decoder reading [z; x_h].
class ConCvae {
 public:
  ConCvae(ParameterStore& store, const ModelConfig& config, const CvaeConfig& cvae);

  SequenceStates encode_input(std::span<const int> premise, std::span<const int> hypothesis,
                              const RunState& run) const;
  SequenceStates encode_explanation(std::span<const int> explanation, const RunState& run) const;

  Var pool(const SequenceStates& states) const;
  GaussianVars prior(const Var& x_pooled) const;
  GaussianVars posterior(const Var& x_pooled, const Var& y_pooled) const;

  // Memory for the decoder: the (projected) latent as one extra position
  // ahead of the input states.
  SequenceStates latent_memory(const Var& z, const SequenceStates& x_states) const;

  // Per-example ELBO pieces for one explanation. `y_states_out`, when given,
  // receives the explanation encoding for reuse by a predictor head.
  struct ExampleElbo {
    Var nll;
    Var kl;
    int tokens = 0;
    SequenceStates x_states;
    SequenceStates y_states;
  };
  ExampleElbo example_elbo(const Example& ex, std::size_t reference, const RunState& run,
                           const NoiseSource& noise = {}) const;

  // Batch objective; with several references the per-reference objectives
  // are averaged.
  ElboTerms elbo_loss(std::span<const Example> batch, const RunState& run, double beta,
                      const NoiseSource& noise = {}) const;

  std::vector<int> decode_with_latent(std::span<const double> z, const SequenceStates& x_states,
                                      int max_len = 25) const;

  // Prior of p(z | x) for one input, evaluated without a graph.
  LatentGaussian prior_of(std::span<const int> premise, std::span<const int> hypothesis) const;
  LatentGaussian posterior_of(std::span<const int> premise, std::span<const int> hypothesis,
                              std::span<const int> explanation) const;

  // Log-probabilities of `target` tokens decoded from latent `z`.
  std::vector<double> reference_log_probs(std::span<const int> premise,
                                          std::span<const int> hypothesis,
                                          std::span<const int> target,
                                          std::span<const double> z) const;

  const CvaeConfig& cvae_config() const { return cvae_; }
  int latent_dim() const { return latent_dim_; }
  const Decoder& decoder() const { return decoder_; }
  const Encoder& encoder() const { return encoder_; }

 private:
  ModelConfig config_;
  CvaeConfig cvae_;
  int latent_dim_;
  Encoder encoder_;
  Concoder concoder_;
  Affine prior_mean_, prior_log_std_;
  Affine posterior_mean_, posterior_log_std_;
  Affine latent_projection_;  // only when latent_dim != hidden
  Decoder decoder_;
};

}  // namespace interaction
