#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "interaction/classifiers.hpp"
#include "interaction/concvae.hpp"
#include "interaction/config.hpp"
#include "interaction/interaction.hpp"
#include "interaction/parameters.hpp"
#include "interaction/seq2seq.hpp"

namespace interaction {

// Where the latent point comes from when scoring or generating text with a
// latent model.
enum class LatentPoint { prior_mean, posterior_mean };

// Uniform training/evaluation surface over every model kind.
class Model {
 public:
  virtual ~Model() = default;

  ModelKind kind() const { return kind_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  std::size_t parameter_count() const { return store_.count(); }
  // Trainable scalars in the label predictor / generator parts.
  virtual std::size_t prediction_parameters() const { return 0; }
  virtual std::size_t generation_parameters() const { return 0; }

  // Scalar objective for one batch. `beta` weights the KL term of latent
  // models and is ignored elsewhere.
  virtual Var loss(std::span<const Example> batch, const RunState& run, double beta) const = 0;

  // Objective on a batch in evaluation mode (no dropout, latent at the
  // posterior mean, full KL weight), averaged over the reference slots.
  double validation_loss(std::span<const Example> batch) const;

  virtual std::optional<int> predict_label(const Example&) const { return std::nullopt; }
  virtual std::optional<std::vector<int>> generate(const Example&, int /*max_len*/) const {
    return std::nullopt;
  }
  // Token log-probabilities of each reference explanation.
  virtual std::optional<std::vector<std::vector<double>>> reference_log_probs(
      const Example&, LatentPoint = LatentPoint::prior_mean) const {
    return std::nullopt;
  }

  virtual const InteractionModel* as_interaction() const { return nullptr; }
  virtual const ConCvae* as_latent() const { return nullptr; }
  virtual const Classifier* as_classifier() const { return nullptr; }
  virtual const Seq2Seq* as_seq2seq() const { return nullptr; }

  double full_beta() const { return beta_; }

 protected:
  Model(ModelKind kind, std::uint64_t seed, double beta = 1.0)
      : kind_(kind), store_(seed), beta_(beta) {}

 private:
  ModelKind kind_;
  ParameterStore store_;
  double beta_;
};

// Builds the model for `config.kind` with vocabulary size `vocab_size`,
// initialising parameters from `seed`.
std::unique_ptr<Model> make_model(const RunConfig& config, int vocab_size, std::uint64_t seed);

}  // namespace interaction
