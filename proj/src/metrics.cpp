#include "interaction/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace interaction {

double perplexity(const ReferenceLogProbs& log_probs) {
  double total = 0.0;
  long count = 0;
  for (const auto& example : log_probs)
    for (const auto& reference : example)
      for (double lp : reference) {
        total -= lp;
        ++count;
      }
  if (count == 0) throw std::invalid_argument("perplexity: empty corpus");
  return std::exp(total / static_cast<double>(count));
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngrams(const Tokens& tokens, int order) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + order)];
  return counts;
}

}  // namespace

BleuStats bleu_statistics(std::span<const Tokens> hypotheses,
                          std::span<const std::vector<Tokens>> references, int max_order) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
  if (max_order < 1) throw std::invalid_argument("bleu: max_order must be >= 1");
  BleuStats stats;
  stats.matches.assign(max_order, 0);
  stats.totals.assign(max_order, 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& hyp = hypotheses[i];
    const auto& refs = references[i];
    if (refs.empty()) throw std::invalid_argument("bleu: example without references");
    stats.hypothesis_length += static_cast<long>(hyp.size());

    // Closest reference length; ties go to the shorter reference.
    long best = static_cast<long>(refs.front().size());
    for (const auto& r : refs) {
      const long len = static_cast<long>(r.size());
      const long hl = static_cast<long>(hyp.size());
      if (std::labs(len - hl) < std::labs(best - hl) ||
          (std::labs(len - hl) == std::labs(best - hl) && len < best))
        best = len;
    }
    stats.reference_length += best;

    for (int n = 1; n <= max_order; ++n) {
      const auto hyp_counts = ngrams(hyp, n);
      NgramCounts max_ref;
      for (const auto& r : refs)
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hyp_counts) {
        stats.totals[n - 1] += c;
        auto it = max_ref.find(g);
        if (it != max_ref.end()) stats.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  return stats;
}

double bleu_from_statistics(const BleuStats& stats, const BleuOptions& options) {
  const int orders = static_cast<int>(stats.matches.size());
  double log_sum = 0.0;
  for (int n = 0; n < orders; ++n) {
    double num = static_cast<double>(stats.matches[n]);
    double den = static_cast<double>(stats.totals[n]);
    if (options.smoothing && n > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  if (stats.hypothesis_length == 0) return 0.0;
  const double c = static_cast<double>(stats.hypothesis_length);
  const double r = static_cast<double>(stats.reference_length);
  const double log_bp = c > r ? 0.0 : 1.0 - r / c;
  return 100.0 * std::exp(log_bp + log_sum / orders);
}

double bleu(std::span<const Tokens> hypotheses, std::span<const std::vector<Tokens>> references,
            const BleuOptions& options) {
  return bleu_from_statistics(bleu_statistics(hypotheses, references, options.max_order),
                              options);
}

std::vector<AnnotationRecord> parse_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("annotations line " + std::to_string(line_no) + ": " + e.what());
    }
    AnnotationRecord r;
    try {
      r.example_index = j.at("example_index").get<int>();
      r.required_args = j.at("required_args").get<std::vector<std::string>>();
      for (int a = 0; a < 3; ++a) {
        const std::string key = "annotator_" + std::to_string(a + 1);
        if (!j.contains(key))
          throw DataError("annotations line " + std::to_string(line_no) + ": missing " + key);
        r.annotators[a] = j.at(key).get<std::vector<std::string>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("annotations line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotations file: " + path);
  return parse_annotations(in);
}

double annotator_score(const AnnotationRecord& record, int annotator) {
  if (record.required_args.empty())
    throw DataError("example " + std::to_string(record.example_index) +
                    " has no required arguments");
  const std::set<std::string> required(record.required_args.begin(), record.required_args.end());
  const std::set<std::string> mentioned(record.annotators.at(annotator).begin(),
                                        record.annotators.at(annotator).end());
  for (const auto& m : mentioned)
    if (!required.count(m))
      throw DataError("example " + std::to_string(record.example_index) + ": annotator " +
                      std::to_string(annotator + 1) + " mentions unknown argument '" + m + "'");
  if (mentioned.size() > required.size())
    throw DataError("mentioned arguments exceed required arguments");
  return static_cast<double>(mentioned.size()) / static_cast<double>(required.size());
}

double correct_at_k(std::span<const AnnotationRecord> annotations, int k) {
  if (k < 1) throw std::invalid_argument("correct_at_k: k must be >= 1");
  std::vector<const AnnotationRecord*> sorted;
  for (const auto& a : annotations) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* x, const auto* y) { return x->example_index < y->example_index; });
  if (static_cast<int>(sorted.size()) < k)
    throw DataError("annotations cover " + std::to_string(sorted.size()) + " examples, need " +
                    std::to_string(k));
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    double example = 0.0;
    for (int a = 0; a < 3; ++a) example += annotator_score(*sorted[i], a);
    total += example / 3.0;
  }
  return 100.0 * total / static_cast<double>(k);
}

std::vector<double> signed_rank_magnitudes(std::span<const double> differences) {
  std::vector<double> mags;
  for (double d : differences)
    if (d != 0.0) mags.push_back(std::fabs(d));
  std::vector<std::size_t> order(mags.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return mags[x] < mags[y]; });
  std::vector<double> ranks(mags.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && mags[order[j + 1]] == mags[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
    i = j + 1;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples must be paired");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) diffs.push_back(a[i] - b[i]);
  const auto ranks = signed_rank_magnitudes(diffs);

  WilcoxonResult res;
  res.n = static_cast<int>(ranks.size());
  if (res.n < 5) return res;
  res.sufficient = true;

  std::size_t k = 0;
  for (double d : diffs) {
    if (d == 0.0) continue;
    if (d > 0.0) res.w_plus += ranks[k];
    ++k;
  }

  if (res.n <= 20) {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers.
    res.exact = true;
    std::vector<int> doubled(ranks.size());
    int max_sum = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      max_sum += doubled[i];
    }
    std::vector<double> counts(max_sum + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int r : doubled) {
      for (int s = reach; s >= 0; --s)
        if (counts[s] != 0.0) counts[s + r] += counts[s];
      reach += r;
    }
    const double total = std::ldexp(1.0, res.n);
    const int observed = static_cast<int>(std::lround(2.0 * res.w_plus));
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= max_sum; ++s) {
      if (s <= observed) lower += counts[s];
      if (s >= observed) upper += counts[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return res;
  }

  const double n = res.n;
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::fabs(res.w_plus - mean) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

std::string format_mean_std(double mean, std::optional<double> stddev, int decimals) {
  char buf[96];
  if (stddev)
    std::snprintf(buf, sizeof buf, "%.*f (%.*f)", decimals, mean, decimals, *stddev);
  else
    std::snprintf(buf, sizeof buf, "%.*f", decimals, mean);
  return buf;
}

std::map<std::string, MetricSummary> aggregate_seeds(std::span<const SeedRun> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_seeds: no runs");
  std::vector<const SeedRun*> sorted;
  for (const auto& r : runs) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SeedRun* x, const SeedRun* y) { return x->seed < y->seed; });

  std::map<std::string, std::vector<double>> values;
  for (const auto* r : sorted)
    for (const auto& [name, v] : r->metrics) values[name].push_back(v);

  std::map<std::string, MetricSummary> out;
  for (const auto& [name, vs] : values) {
    MetricSummary s;
    s.runs = static_cast<int>(vs.size());
    double sum = 0.0;
    for (double v : vs) sum += v;
    s.mean = sum / s.runs;
    if (s.runs >= 2) {
      double ss = 0.0;
      for (double v : vs) ss += (v - s.mean) * (v - s.mean);
      s.stddev = std::sqrt(ss / (s.runs - 1));
    }
    s.formatted = format_mean_std(s.mean, s.stddev);
    out[name] = std::move(s);
  }
  return out;
}

}  // namespace interaction
