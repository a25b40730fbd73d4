#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interaction/metrics.hpp"
#include "interaction/models.hpp"

namespace interaction {

// Metrics of one trained model on one corpus. Unset fields are not
// applicable to the model kind.
struct CheckpointMetrics {
  std::optional<double> accuracy;    // percent
  std::optional<double> perplexity;  // latent models decode from the prior mean
  std::optional<double> bleu;
  // Per-example scores used for paired significance tests.
  std::vector<double> example_correct;  // 0 or 1
  std::vector<double> example_nll;      // mean token NLL over the references
  std::vector<Tokens> generations;
};

// Runs every applicable metric. Per-example work is spread over OpenMP
// threads; reductions run in example order.
CheckpointMetrics evaluate_model(const Model& model, const Vocabulary& vocab,
                                 std::span<const Example> examples, int max_len,
                                 const BleuOptions& bleu_options = {});

struct FamilyInput {
  std::string name;  // usually the model kind
  std::vector<std::pair<int, CheckpointMetrics>> seeds;  // (seed, metrics)
  std::optional<double> correct_at_k;
};

struct SignificanceResult {
  std::string first, second, metric;
  WilcoxonResult test;
};

// Paired tests between every pair of families on the per-example scores
// (averaged over seeds) they both provide.
std::vector<SignificanceResult> compare_families(std::span<const FamilyInput> families);

struct ReportMetadata {
  std::string config_hash;  // hex
  std::string corpus;
  int examples = 0;
  bool bleu_smoothing = false;
  int correct_k = 100;
};

// EvalReport as a JSON document (pretty-printed, stable key order).
std::string render_report(const ReportMetadata& meta, std::span<const FamilyInput> families,
                          std::span<const SignificanceResult> significance);

}  // namespace interaction
