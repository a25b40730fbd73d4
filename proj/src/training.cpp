#include "interaction/training.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace interaction {

namespace fs = std::filesystem;

Adam::Adam(ParameterStore& store, const AdamOptions& options) : store_(store), options_(options) {
  for (const auto& e : store_.entries()) {
    m_.emplace_back(e.var.value().rows, e.var.value().cols);
    v_.emplace_back(e.var.value().rows, e.var.value().cols);
  }
}

void Adam::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  const auto& entries = store_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var p = entries[i].var;
    const Matrix& g = p.grad();
    if (g.size() == 0) continue;  // nothing flowed into this array
    auto& w = p.mutable_value().data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g.data[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g.data[j] * g.data[j];
      w[j] -= options_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.eps);
    }
  }
  store_.zero_grad();
}

OptimizerState Adam::state() const { return {step_, m_, v_}; }

void Adam::load_state(const OptimizerState& state) {
  if (state.first_moment.size() != m_.size() || state.second_moment.size() != v_.size())
    throw CheckpointError("optimizer state does not match the model");
  for (std::size_t i = 0; i < m_.size(); ++i)
    if (!state.first_moment[i].same_shape(m_[i]) || !state.second_moment[i].same_shape(v_[i]))
      throw CheckpointError("optimizer state shape mismatch");
  step_ = state.step;
  m_ = state.first_moment;
  v_ = state.second_moment;
}

namespace {

std::vector<Quadruplet> load_split(const RunConfig& config, Split split) {
  const auto& d = config.data;
  const std::string& path =
      split == Split::train ? d.train : split == Split::val ? d.val : d.test;
  if (!path.empty()) {
    auto result = load_quadruplets(path, split, d.schema);
    for (const auto& msg : result.diagnostics) std::fprintf(stderr, "warning: %s\n", msg.c_str());
    return std::move(result.records);
  }
  const int n = split == Split::train ? d.synth_train : split == Split::val ? d.synth_val
                                                                            : d.synth_test;
  if (n <= 0) return {};
  SynthOptions opts;
  opts.split = split;
  opts.artifact_strength = d.synth_artifacts;
  return synth_corpus(n, d.synth_seed + static_cast<std::uint64_t>(split) * 7919, opts);
}

std::vector<Example> gather(std::span<const Example> corpus, const std::vector<std::size_t>& idx) {
  std::vector<Example> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus[i]);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

Datasets load_datasets(const RunConfig& config, const Vocabulary* vocab) {
  Datasets d;
  d.train_records = load_split(config, Split::train);
  d.val_records = load_split(config, Split::val);
  d.test_records = load_split(config, Split::test);
  if (vocab) {
    d.vocab = *vocab;
  } else {
    if (d.train_records.empty()) throw DataError("training split is empty");
    d.vocab = Vocabulary::build(d.train_records, config.data.min_freq);
  }
  d.train = encode_corpus(d.vocab, d.train_records, config.data.max_len);
  d.val = encode_corpus(d.vocab, d.val_records, config.data.max_len);
  d.test = encode_corpus(d.vocab, d.test_records, config.data.max_len);
  return d;
}

std::string render_epoch_record(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "{\"epoch\": %d, \"train_loss\": %.17g, \"val_loss\": %.17g, \"beta\": %.17g}",
                r.epoch, r.train_loss, r.val_loss, r.beta);
  return buf;
}

double warmup_beta(double beta, double warmup_epochs, std::size_t steps_per_epoch,
                   std::uint64_t step) {
  const double span = warmup_epochs * static_cast<double>(steps_per_epoch);
  if (span <= 0.0) return beta;
  return beta * std::min(1.0, static_cast<double>(step + 1) / span);
}

double validation_loss(const Model& model, std::span<const Example> examples, int batch_size) {
  if (examples.empty()) throw std::invalid_argument("validation_loss: empty corpus");
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, examples.size() - start);
    total += model.validation_loss(examples.subspan(start, n)) * static_cast<double>(n);
  }
  return total / static_cast<double>(examples.size());
}

TrainResult train_model(Model& model, const RunConfig& config, const Vocabulary& vocab,
                        std::span<const Example> train, std::span<const Example> val,
                        std::uint64_t seed,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train.empty()) throw DataError("training split is empty");
  const auto& t = config.training;
  Adam adam(model.parameters(), {t.lr, t.beta1, t.beta2, t.eps});
  std::mt19937_64 dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  RunState run{true, config.model.dropout, &dropout_rng};
  const double beta = model.full_beta();
  const std::size_t steps_per_epoch = (train.size() + t.batch_size - 1) / t.batch_size;

  TrainResult result;
  bool have_best = false;
  for (int epoch = 1; epoch <= t.epochs; ++epoch) {
    const auto batches = make_batches(train, t.batch_size, seed + static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    double beta_now = beta;
    for (const auto& b : batches) {
      beta_now = warmup_beta(beta, config.cvae.kl_warmup_epochs, steps_per_epoch, adam.steps());
      const auto examples = gather(train, b.indices);
      Var loss = model.loss(examples, run, beta_now);
      loss_sum += loss.item() * static_cast<double>(examples.size());
      backward(loss);
      adam.step();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val_loss = val.empty() ? rec.train_loss : validation_loss(model, val, t.batch_size);
    rec.beta = beta_now;
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (!have_best || rec.val_loss < result.best.val_loss) {
      have_best = true;
      result.best.model_kind = std::string(model_kind_name(model.kind()));
      result.best.config = config.render();
      result.best.vocab_hash = vocab.hash();
      result.best.seed = static_cast<std::int64_t>(seed);
      result.best.epoch = static_cast<std::uint32_t>(epoch);
      result.best.val_loss = rec.val_loss;
      result.best.parameters = snapshot_parameters(model.parameters());
      result.best.optimizer = adam.state();
    }
  }
  return result;
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab,
                                             RunConfig* config_out) {
  if (ckpt.vocab_hash != vocab.hash())
    throw CheckpointError("checkpoint was trained with a different vocabulary");
  RunConfig config;
  try {
    config = RunConfig::parse_string(ckpt.config);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config unreadable: ") + e.what());
  }
  if (std::string(model_kind_name(config.kind)) != ckpt.model_kind)
    throw CheckpointError("checkpoint model kind disagrees with its config");
  auto model = make_model(config, vocab.size(), 0);
  restore_parameters(model->parameters(), ckpt.parameters);
  if (config_out) *config_out = config;
  return model;
}

std::vector<SeedOutput> run_training(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  std::vector<int> seeds = config.training.seeds;
  if (const char* env = std::getenv("RUN_SEED"); env && *env) {
    try {
      seeds = {std::stoi(env)};
    } catch (const std::exception&) {
      throw ConfigError(std::string("RUN_SEED is not an integer: ") + env);
    }
  }
  omp_set_num_threads(std::max(1, config.training.threads));

  const Datasets data = load_datasets(config);
  const fs::path root(out_dir);
  fs::create_directories(root);
  write_text(root / "config.resolved.txt", config.render());
  data.vocab.save((root / "vocab.txt").string());

  std::vector<SeedOutput> outputs;
  for (int seed : seeds) {
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    auto model = make_model(config, data.vocab.size(), static_cast<std::uint64_t>(seed));
    std::ofstream log(dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + (dir / "train_log.jsonl").string());
    auto result = train_model(*model, config, data.vocab, data.train, data.val,
                              static_cast<std::uint64_t>(seed), [&](const EpochRecord& r) {
                                log << render_epoch_record(r) << '\n';
                                log.flush();
                                std::fprintf(stderr, "seed %d epoch %d train %.4f val %.4f\n",
                                             seed, r.epoch, r.train_loss, r.val_loss);
                              });
    const std::string ckpt_path = (dir / "checkpoint.bin").string();
    save_checkpoint(ckpt_path, result.best);
    outputs.push_back({seed, ckpt_path, (dir / "train_log.jsonl").string()});
  }
  return outputs;
}

}  // namespace interaction
