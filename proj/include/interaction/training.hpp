#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interaction/checkpoint.hpp"
#include "interaction/config.hpp"
#include "interaction/corpus.hpp"
#include "interaction/models.hpp"

namespace interaction {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over every array of a ParameterStore.
class Adam {
 public:
  Adam(ParameterStore& store, const AdamOptions& options);

  // Applies one update from the accumulated gradients, then clears them.
  void step();

  OptimizerState state() const;
  void load_state(const OptimizerState& state);
  std::uint64_t steps() const { return step_; }

 private:
  ParameterStore& store_;
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_, v_;
};

// Encoded splits plus the vocabulary they were encoded with.
struct Datasets {
  Vocabulary vocab;
  std::vector<Quadruplet> train_records, val_records, test_records;
  std::vector<Example> train, val, test;
};

// Reads the configured files, or synthesises any split without a path. The
// vocabulary comes from the training split unless `vocab` is given.
Datasets load_datasets(const RunConfig& config, const Vocabulary* vocab = nullptr);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double beta = 0.0;  // KL weight at the end of the epoch
};

std::string render_epoch_record(const EpochRecord& record);

struct TrainResult {
  std::vector<EpochRecord> log;
  Checkpoint best;  // lowest validation loss; ties keep the earlier epoch
};

// KL weight after `step` optimizer steps (0-based) under linear warm-up.
double warmup_beta(double beta, double warmup_epochs, std::size_t steps_per_epoch,
                   std::uint64_t step);

// Mean validation loss over `examples` in evaluation mode.
double validation_loss(const Model& model, std::span<const Example> examples, int batch_size);

// Trains `model` in place and returns the per-epoch log and the best
// checkpoint. `on_epoch` runs after each epoch.
TrainResult train_model(Model& model, const RunConfig& config, const Vocabulary& vocab,
                        std::span<const Example> train, std::span<const Example> val,
                        std::uint64_t seed,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

// Rebuilds the model stored in a checkpoint; the vocabulary must match.
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab,
                                             RunConfig* config_out = nullptr);

struct SeedOutput {
  int seed = 0;
  std::string checkpoint_path;
  std::string log_path;
};

// Full training command: writes config.resolved.txt and vocab.txt into
// `out_dir`, then seed_<s>/checkpoint.bin and seed_<s>/train_log.jsonl per
// seed. The RUN_SEED environment variable, when set, replaces the seed list.
std::vector<SeedOutput> run_training(const RunConfig& config, const std::string& out_dir);

}  // namespace interaction
