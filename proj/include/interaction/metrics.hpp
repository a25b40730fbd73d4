#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interaction/corpus.hpp"

namespace interaction {

// Per-token log-probabilities indexed [example][reference][token].
using ReferenceLogProbs = std::vector<std::vector<std::vector<double>>>;

// exp of the mean token cross-entropy over every (example, reference, token).
double perplexity(const ReferenceLogProbs& log_probs);

struct BleuOptions {
  int max_order = 4;
  // Add-one smoothing of the modified precisions for orders >= 2.
  bool smoothing = false;
};

struct BleuStats {
  std::vector<long> matches;  // clipped n-gram matches per order
  std::vector<long> totals;   // hypothesis n-grams per order
  long hypothesis_length = 0;
  long reference_length = 0;  // closest reference lengths, summed
};

BleuStats bleu_statistics(std::span<const Tokens> hypotheses,
                          std::span<const std::vector<Tokens>> references, int max_order = 4);
double bleu_from_statistics(const BleuStats& stats, const BleuOptions& options = {});

// Corpus BLEU in [0, 100] with multi-reference clipping and the brevity
// penalty against the closest reference length.
double bleu(std::span<const Tokens> hypotheses, std::span<const std::vector<Tokens>> references,
            const BleuOptions& options = {});

struct AnnotationRecord {
  int example_index = 0;
  std::vector<std::string> required_args;
  std::array<std::vector<std::string>, 3> annotators;
};

std::vector<AnnotationRecord> parse_annotations(std::istream& in);
std::vector<AnnotationRecord> load_annotations(const std::string& path);

// k/n partial credit per annotator, mean of three annotators per example,
// mean over the first `k` examples, scaled to [0, 100].
double annotator_score(const AnnotationRecord& record, int annotator);
double correct_at_k(std::span<const AnnotationRecord> annotations, int k = 100);

struct WilcoxonResult {
  bool sufficient = false;  // false when fewer than 5 nonzero differences
  double p_value = 1.0;
  double w_plus = 0.0;
  int n = 0;  // nonzero differences used
  bool exact = false;
};

// Two-sided paired signed-rank test. Zero differences are dropped and tied
// magnitudes receive mid-ranks. Exact null distribution for n <= 20, normal
// approximation with tie and continuity corrections above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Mid-ranks (1-based) of |d| for the nonzero entries of d, in input order.
std::vector<double> signed_rank_magnitudes(std::span<const double> differences);

struct SeedRun {
  int seed = 0;
  std::map<std::string, double> metrics;
};

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> stddev;  // sample (n - 1) deviation, only for n >= 2
  int runs = 0;
  std::string formatted;  // "mean (std)" or "mean"
};

std::string format_mean_std(double mean, std::optional<double> stddev, int decimals = 2);
std::map<std::string, MetricSummary> aggregate_seeds(std::span<const SeedRun> runs);

}  // namespace interaction
