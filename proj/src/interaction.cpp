#include "interaction/interaction.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "interaction/classifiers.hpp"

namespace interaction {

std::string_view predictor_variant_name(PredictorVariant v) {
  switch (v) {
    case PredictorVariant::m1:
      return "m1";
    case PredictorVariant::m2:
      return "m2";
    case PredictorVariant::m3:
      return "m3";
  }
  return "m1";
}

PredictorVariant parse_predictor_variant(std::string_view name) {
  if (name == "m1" || name == "M1") return PredictorVariant::m1;
  if (name == "m2" || name == "M2") return PredictorVariant::m2;
  if (name == "m3" || name == "M3") return PredictorVariant::m3;
  throw std::invalid_argument("unknown predictor variant: " + std::string(name));
}

std::vector<std::vector<double>> interpolation_points(const LatentGaussian& g,
                                                      std::span<const double> k_values,
                                                      int dimension) {
  if (dimension >= g.dim()) throw std::invalid_argument("interpolation dimension out of range");
  const auto sd = g.stddev();
  std::vector<std::vector<double>> points;
  points.reserve(k_values.size());
  for (double k : k_values) {
    std::vector<double> z = g.mean;
    for (int i = 0; i < g.dim(); ++i)
      if (dimension < 0 || dimension == i) z[i] += k * sd[i];
    points.push_back(std::move(z));
  }
  return points;
}

InteractionModel::InteractionModel(ParameterStore& store, const ModelConfig& config,
                                   const CvaeConfig& cvae, PredictorVariant variant)
    : variant_(variant), core_(store, config, cvae) {
  const int width = variant == PredictorVariant::m3 ? 2 * config.hidden : config.hidden;
  head_ = Affine(store, "predictor", width, kNumLabels);
}

Var InteractionModel::predictor_logits(const SequenceStates* x_states,
                                       const SequenceStates* y_states) const {
  auto first_bos = [](const SequenceStates* s) { return ag::slice_rows(s->values, 0, 1); };
  switch (variant_) {
    case PredictorVariant::m1:
      if (!x_states) throw std::invalid_argument("M1 predictor needs premise/hypothesis states");
      return head_(first_bos(x_states));
    case PredictorVariant::m2:
      if (!y_states) throw std::invalid_argument("M2 predictor needs explanation states");
      return head_(first_bos(y_states));
    case PredictorVariant::m3:
      if (!x_states || !y_states)
        throw std::invalid_argument("M3 predictor needs input and explanation states");
      return head_(ag::concat_cols({first_bos(x_states), first_bos(y_states)}));
  }
  throw std::logic_error("unreachable predictor variant");
}

InteractionModel::JointTerms InteractionModel::joint_loss(std::span<const Example> batch,
                                                          const RunState& run, double beta,
                                                          double lambda,
                                                          const NoiseSource& noise) const {
  if (batch.empty()) throw std::invalid_argument("joint_loss: empty batch");
  const std::size_t refs = batch.front().explanations.size();
  if (refs == 0) throw std::invalid_argument("joint_loss: batch has no explanations");
  Var nll, kl, ce;
  int tokens = 0;
  for (const auto& ex : batch) {
    for (std::size_t r = 0; r < refs; ++r) {
      auto e = core_.example_elbo(ex, r, run, noise);
      const Var logits = predictor_logits(&e.x_states, &e.y_states);
      const Var c = classification_loss(logits, ex.label);
      nll = nll.defined() ? ag::add(nll, e.nll) : e.nll;
      kl = kl.defined() ? ag::add(kl, e.kl) : e.kl;
      ce = ce.defined() ? ag::add(ce, c) : c;
      tokens += e.tokens;
    }
  }
  const double norm = 1.0 / static_cast<double>(batch.size() * refs);
  JointTerms t;
  t.elbo.reconstruction = ag::scale(nll, norm);
  t.elbo.kl = ag::scale(kl, norm);
  t.elbo.objective =
      elbo_objective(t.elbo.reconstruction, t.elbo.kl, beta, core_.cvae_config().free_bits);
  t.elbo.tokens = tokens;
  t.classification = ag::scale(ce, norm);
  t.objective = lambda == 0.0 ? t.elbo.objective
                              : ag::add(t.elbo.objective, ag::scale(t.classification, lambda));
  return t;
}

StepOneResult InteractionModel::step_one(std::span<const int> premise,
                                         std::span<const int> hypothesis, int max_len) const {
  NoGradGuard no_grad;
  const RunState eval;
  StepOneResult out;
  const auto x_states = core_.encode_input(premise, hypothesis, eval);
  out.latent = core_.prior(core_.pool(x_states)).value();
  out.explanation = core_.decode_with_latent(out.latent.mean, x_states, max_len);

  Var logits;
  if (variant_ == PredictorVariant::m1) {
    logits = predictor_logits(&x_states, nullptr);
  } else {
    // Same truncation rule as encode_sequence: keep <eos>, drop the tail.
    const std::size_t room = static_cast<std::size_t>(core_.encoder().config().max_pos) - 2;
    const std::size_t keep = std::min(out.explanation.size(), room);
    std::vector<int> ids{Vocabulary::bos};
    ids.insert(ids.end(), out.explanation.begin(), out.explanation.begin() + keep);
    ids.push_back(Vocabulary::eos);
    const auto y_states = core_.encode_explanation(ids, eval);
    logits = predictor_logits(&x_states, &y_states);
  }
  out.label = argmax_label(logits.value());
  return out;
}

std::vector<std::vector<int>> InteractionModel::step_two(std::span<const int> premise,
                                                         std::span<const int> hypothesis,
                                                         std::span<const double> k_values,
                                                         const InterpolationOptions& options,
                                                         std::span<const int> explanation) const {
  NoGradGuard no_grad;
  const RunState eval;
  const auto x_states = core_.encode_input(premise, hypothesis, eval);
  const Var x_c = core_.pool(x_states);
  LatentGaussian g;
  if (options.source == InterpolationOptions::Source::posterior) {
    if (explanation.empty())
      throw std::invalid_argument("posterior interpolation needs a reference explanation");
    g = core_.posterior(x_c, core_.pool(core_.encode_explanation(explanation, eval))).value();
  } else {
    g = core_.prior(x_c).value();
  }
  std::vector<std::vector<int>> out;
  for (const auto& z : interpolation_points(g, k_values, options.dimension))
    out.push_back(core_.decode_with_latent(z, x_states, options.max_len));
  return out;
}

InteractionOutput InteractionModel::explain(std::span<const int> premise,
                                            std::span<const int> hypothesis,
                                            std::span<const double> k_values) const {
  const auto one = step_one(premise, hypothesis);
  InteractionOutput out;
  out.label = one.label;
  out.map_explanation = one.explanation;
  out.latent_used = one.latent;
  out.diverse_explanations = step_two(premise, hypothesis, k_values);
  return out;
}

int InteractionModel::predict_label(std::span<const int> premise,
                                    std::span<const int> hypothesis) const {
  if (variant_ == PredictorVariant::m1) {
    NoGradGuard no_grad;
    const auto x_states = core_.encode_input(premise, hypothesis, RunState{});
    return argmax_label(predictor_logits(&x_states, nullptr).value());
  }
  return step_one(premise, hypothesis).label;
}

}  // namespace interaction
