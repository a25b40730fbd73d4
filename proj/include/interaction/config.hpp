#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "interaction/classifiers.hpp"
#include "interaction/concvae.hpp"
#include "interaction/corpus.hpp"
#include "interaction/interaction.hpp"
#include "interaction/seq2seq.hpp"
#include "interaction/transformer.hpp"

namespace interaction {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind {
  separate,
  mixture,
  agnostic,
  seq2seq_full,
  seq2seq_agnostic,
  cvae,
  concvae,
  interaction_m1,
  interaction_m2,
  interaction_m3,
};

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
bool is_classifier(ModelKind kind);
bool is_seq2seq(ModelKind kind);
bool has_latent(ModelKind kind);
bool predicts_label(ModelKind kind);
bool generates(ModelKind kind);

struct TrainingConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 16;
  int epochs = 10;
  std::vector<int> seeds{1000, 2000, 3000};
  int threads = 1;
};

struct DataConfig {
  std::string train;
  std::string val;
  std::string test;
  Schema schema;
  int max_len = 25;
  int min_freq = 3;
  // Synthetic corpora are used for any split without a path.
  int synth_train = 0;
  int synth_val = 0;
  int synth_test = 0;
  std::uint64_t synth_seed = 7;
  double synth_artifacts = 0.0;
};

struct EvalConfig {
  bool bleu_smoothing = false;
  std::string annotations;
  int correct_k = 100;
  std::vector<double> k_values{-2.0, -1.0, 0.0, 1.0, 2.0};
};

struct RunConfig {
  std::string profile = "paper";
  ModelKind kind = ModelKind::concvae;
  ModelConfig model = ModelConfig::base(0);
  ClassifierKind classifier = ClassifierKind::mixture;
  bool absolute_difference = false;
  GenerationMode generation = GenerationMode::full;
  CvaeConfig cvae;
  PredictorVariant variant = PredictorVariant::m1;
  double lambda = 1.0;
  TrainingConfig training;
  DataConfig data;
  EvalConfig eval;

  // Full-corpus protocol defaults.
  static RunConfig paper();
  // Small model on synthetic data; finishes in minutes on a laptop.
  static RunConfig toy();
  static RunConfig profile_defaults(std::string_view profile);

  // Profile defaults overridden by `key = value` lines under [section]
  // headers. Unknown keys raise ConfigError.
  static RunConfig parse(std::istream& in);
  static RunConfig parse_string(const std::string& text);
  static RunConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  // Points the per-kind switches (classifier kind, pooling, ...) at `kind`.
  void apply_kind(ModelKind k);
  void validate() const;

  // Canonical text form; parse(render()) reproduces this config.
  std::string render() const;
  std::uint64_t hash() const;
};

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace interaction
