#include "interaction/models.hpp"

namespace interaction {

double Model::validation_loss(std::span<const Example> batch) const {
  NoGradGuard no_grad;
  return loss(batch, RunState{}, beta_).item();
}

namespace {

class ClassifierModel final : public Model {
 public:
  ClassifierModel(const RunConfig& c, const ModelConfig& mc, std::uint64_t seed)
      : Model(c.kind, seed), net_(parameters(), c.classifier, mc, c.absolute_difference) {}

  std::size_t prediction_parameters() const override { return parameter_count(); }

  Var loss(std::span<const Example> batch, const RunState& run, double) const override {
    std::vector<Var> logits;
    std::vector<int> labels;
    for (const auto& ex : batch) {
      logits.push_back(net_.logits(ex.premise, ex.hypothesis, run));
      labels.push_back(ex.label);
    }
    return mean_classification_loss(logits, labels);
  }

  std::optional<int> predict_label(const Example& ex) const override {
    NoGradGuard no_grad;
    return argmax_label(net_.logits(ex.premise, ex.hypothesis, RunState{}).value());
  }

  const Classifier* as_classifier() const override { return &net_; }

 private:
  Classifier net_;
};

class Seq2SeqModel final : public Model {
 public:
  Seq2SeqModel(const RunConfig& c, const ModelConfig& mc, std::uint64_t seed)
      : Model(c.kind, seed), net_(parameters(), c.generation, mc) {}

  std::size_t generation_parameters() const override { return parameter_count(); }

  Var loss(std::span<const Example> batch, const RunState& run, double) const override {
    return net_.generation_loss(batch, run);
  }

  std::optional<std::vector<int>> generate(const Example& ex, int max_len) const override {
    return net_.greedy_decode(ex.premise, ex.hypothesis, max_len);
  }

  std::optional<std::vector<std::vector<double>>> reference_log_probs(
      const Example& ex, LatentPoint) const override {
    std::vector<std::vector<double>> out;
    for (const auto& ref : ex.explanations)
      out.push_back(net_.reference_log_probs(ex.premise, ex.hypothesis, ref));
    return out;
  }

  const Seq2Seq* as_seq2seq() const override { return &net_; }

 private:
  Seq2Seq net_;
};

std::vector<std::vector<double>> latent_log_probs(const ConCvae& core, const Example& ex,
                                                  LatentPoint point) {
  std::vector<std::vector<double>> out;
  const auto prior = core.prior_of(ex.premise, ex.hypothesis);
  for (const auto& ref : ex.explanations) {
    const auto z = point == LatentPoint::prior_mean
                       ? prior.mean
                       : core.posterior_of(ex.premise, ex.hypothesis, ref).mean;
    out.push_back(core.reference_log_probs(ex.premise, ex.hypothesis, ref, z));
  }
  return out;
}

class CvaeModel final : public Model {
 public:
  CvaeModel(const RunConfig& c, const ModelConfig& mc, std::uint64_t seed)
      : Model(c.kind, seed, c.cvae.beta), net_(parameters(), mc, c.cvae) {}

  std::size_t generation_parameters() const override { return parameter_count(); }

  Var loss(std::span<const Example> batch, const RunState& run, double beta) const override {
    return net_.elbo_loss(batch, run, beta).objective;
  }

  std::optional<std::vector<int>> generate(const Example& ex, int max_len) const override {
    NoGradGuard no_grad;
    const RunState eval;
    const auto x_states = net_.encode_input(ex.premise, ex.hypothesis, eval);
    const auto prior = net_.prior_of(ex.premise, ex.hypothesis);
    return net_.decode_with_latent(prior.mean, x_states, max_len);
  }

  std::optional<std::vector<std::vector<double>>> reference_log_probs(
      const Example& ex, LatentPoint point) const override {
    return latent_log_probs(net_, ex, point);
  }

  const ConCvae* as_latent() const override { return &net_; }

 private:
  ConCvae net_;
};

class InteractionWrapper final : public Model {
 public:
  InteractionWrapper(const RunConfig& c, const ModelConfig& mc, std::uint64_t seed)
      : Model(c.kind, seed, c.cvae.beta),
        lambda_(c.lambda),
        net_(parameters(), mc, c.cvae, c.variant) {}

  // The predictor reads the shared encoder, so it is counted as the encoder
  // plus the label head; the generator is everything but the head.
  std::size_t prediction_parameters() const override {
    return parameters().count_with_prefix("encoder.") + parameters().count_with_prefix("predictor.");
  }
  std::size_t generation_parameters() const override {
    return parameter_count() - parameters().count_with_prefix("predictor.");
  }

  Var loss(std::span<const Example> batch, const RunState& run, double beta) const override {
    return net_.joint_loss(batch, run, beta, lambda_).objective;
  }

  std::optional<int> predict_label(const Example& ex) const override {
    return net_.predict_label(ex.premise, ex.hypothesis);
  }

  std::optional<std::vector<int>> generate(const Example& ex, int max_len) const override {
    return net_.step_one(ex.premise, ex.hypothesis, max_len).explanation;
  }

  std::optional<std::vector<std::vector<double>>> reference_log_probs(
      const Example& ex, LatentPoint point) const override {
    return latent_log_probs(net_.core(), ex, point);
  }

  const InteractionModel* as_interaction() const override { return &net_; }
  const ConCvae* as_latent() const override { return &net_.core(); }

 private:
  double lambda_;
  InteractionModel net_;
};

}  // namespace

std::unique_ptr<Model> make_model(const RunConfig& config, int vocab_size, std::uint64_t seed) {
  ModelConfig mc = config.model;
  mc.vocab_size = vocab_size;
  mc.validate();
  if (is_classifier(config.kind)) return std::make_unique<ClassifierModel>(config, mc, seed);
  if (is_seq2seq(config.kind)) return std::make_unique<Seq2SeqModel>(config, mc, seed);
  if (config.kind == ModelKind::cvae || config.kind == ModelKind::concvae)
    return std::make_unique<CvaeModel>(config, mc, seed);
  return std::make_unique<InteractionWrapper>(config, mc, seed);
}

}  // namespace interaction
