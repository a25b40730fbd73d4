#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "interaction/concvae.hpp"

namespace interaction {

// Which encodings the label head reads: M1 the premise/hypothesis pair, M2
// the explanation, M3 both.
enum class PredictorVariant { m1, m2, m3 };

std::string_view predictor_variant_name(PredictorVariant v);
PredictorVariant parse_predictor_variant(std::string_view name);

inline constexpr double kDefaultKValues[] = {-2.0, -1.0, 0.0, 1.0, 2.0};

struct InterpolationOptions {
  enum class Source { prior, posterior };
  Source source = Source::prior;
  // -1 shifts every dimension together; otherwise only this dimension moves.
  int dimension = -1;
  int max_len = 25;
};

struct StepOneResult {
  int label = 0;
  std::vector<int> explanation;
  LatentGaussian latent;
};

struct InteractionOutput {
  int label = 0;
  std::vector<int> map_explanation;
  std::vector<std::vector<int>> diverse_explanations;
  LatentGaussian latent_used;
};

class InteractionModel {
 public:
  InteractionModel(ParameterStore& store, const ModelConfig& config, const CvaeConfig& cvae,
                   PredictorVariant variant);

  // Affine map over the first-<bos> states the variant needs; throws
  // std::invalid_argument when a required input is missing.
  Var predictor_logits(const SequenceStates* x_states, const SequenceStates* y_states) const;

  struct JointTerms {
    ElboTerms elbo;
    Var classification;  // mean cross-entropy
    Var objective;       // elbo objective + lambda * classification
  };
  JointTerms joint_loss(std::span<const Example> batch, const RunState& run, double beta,
                        double lambda, const NoiseSource& noise = {}) const;

  // Deterministic MAP pass: z = prior mean, greedy explanation, then the
  // label from the variant's inputs (M2/M3 re-encode the generated text).
  StepOneResult step_one(std::span<const int> premise, std::span<const int> hypothesis,
                         int max_len = 25) const;

  // One greedy decode per k at z = mean + k * std, in k order.
  std::vector<std::vector<int>> step_two(std::span<const int> premise,
                                         std::span<const int> hypothesis,
                                         std::span<const double> k_values,
                                         const InterpolationOptions& options = {},
                                         std::span<const int> explanation = {}) const;

  InteractionOutput explain(std::span<const int> premise, std::span<const int> hypothesis,
                            std::span<const double> k_values) const;

  int predict_label(std::span<const int> premise, std::span<const int> hypothesis) const;

  PredictorVariant variant() const { return variant_; }
  const ConCvae& core() const { return core_; }
  int head_width() const { return head_.in(); }

 private:
  PredictorVariant variant_;
  ConCvae core_;
  Affine head_;
};

// Latent points mean + k * std along the chosen direction.
std::vector<std::vector<double>> interpolation_points(const LatentGaussian& g,
                                                      std::span<const double> k_values,
                                                      int dimension = -1);

}  // namespace interaction
