#include "interaction/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"

namespace interaction {

CheckpointMetrics evaluate_model(const Model& model, const Vocabulary& vocab,
                                 std::span<const Example> examples, int max_len,
                                 const BleuOptions& bleu_options) {
  if (examples.empty()) throw DataError("evaluation corpus is empty");
  const int n = static_cast<int>(examples.size());
  const bool labels = predicts_label(model.kind());
  const bool text = generates(model.kind());

  std::vector<double> correct(labels ? n : 0);
  ReferenceLogProbs log_probs(text ? n : 0);
  std::vector<Tokens> generations(text ? n : 0);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    NoGradGuard no_grad;
    const Example& ex = examples[i];
    if (labels) correct[i] = model.predict_label(ex).value() == ex.label ? 1.0 : 0.0;
    if (text) {
      log_probs[i] = model.reference_log_probs(ex, LatentPoint::prior_mean).value();
      generations[i] = decode_sequence(vocab, model.generate(ex, max_len).value());
    }
  }

  CheckpointMetrics m;
  if (labels) {
    m.accuracy = 100.0 * std::accumulate(correct.begin(), correct.end(), 0.0) / n;
    m.example_correct = std::move(correct);
  }
  if (text) {
    m.perplexity = perplexity(log_probs);
    m.example_nll.reserve(n);
    for (const auto& refs : log_probs) {
      double s = 0.0;
      for (const auto& r : refs) {
        double t = 0.0;
        for (double lp : r) t -= lp;
        s += r.empty() ? 0.0 : t / static_cast<double>(r.size());
      }
      m.example_nll.push_back(refs.empty() ? 0.0 : s / static_cast<double>(refs.size()));
    }
    std::vector<std::vector<Tokens>> references(n);
    for (int i = 0; i < n; ++i)
      for (const auto& r : examples[i].explanations)
        references[i].push_back(decode_sequence(vocab, r));
    m.bleu = bleu(generations, references, bleu_options);
    m.generations = std::move(generations);
  }
  return m;
}

namespace {

// Per-example mean over seeds, or empty when any seed lacks the score.
std::vector<double> seed_mean(const FamilyInput& f, bool correctness) {
  std::vector<double> out;
  for (const auto& [seed, m] : f.seeds) {
    const auto& v = correctness ? m.example_correct : m.example_nll;
    if (v.empty()) return {};
    if (out.empty()) out.assign(v.size(), 0.0);
    if (v.size() != out.size()) return {};
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  }
  for (double& x : out) x /= static_cast<double>(f.seeds.size());
  return out;
}

}  // namespace

std::vector<SignificanceResult> compare_families(std::span<const FamilyInput> families) {
  std::vector<SignificanceResult> out;
  for (std::size_t a = 0; a < families.size(); ++a)
    for (std::size_t b = a + 1; b < families.size(); ++b)
      for (bool correctness : {true, false}) {
        const auto x = seed_mean(families[a], correctness);
        const auto y = seed_mean(families[b], correctness);
        if (x.empty() || x.size() != y.size()) continue;
        out.push_back({families[a].name, families[b].name,
                       correctness ? "accuracy" : "token_nll", wilcoxon_signed_rank(x, y)});
      }
  return out;
}

std::string render_report(const ReportMetadata& meta, std::span<const FamilyInput> families,
                          std::span<const SignificanceResult> significance) {
  using nlohmann::ordered_json;
  ordered_json doc;
  ordered_json md;
  md["config_hash"] = meta.config_hash;
  md["corpus"] = meta.corpus;
  md["examples"] = meta.examples;
  std::vector<int> seeds;
  for (const auto& f : families)
    for (const auto& [s, m] : f.seeds) seeds.push_back(s);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  md["seeds"] = seeds;
  md["bleu"] = meta.bleu_smoothing ? "corpus BLEU-4, add-one smoothing for n >= 2"
                                   : "corpus BLEU-4, no smoothing";
  md["perplexity"] = "exp of mean token NLL over all references, latent at prior mean";
  md["std"] = "sample (n-1)";
  md["correct_k"] = meta.correct_k;
  doc["metadata"] = md;

  static const char* kMetrics[] = {"accuracy", "perplexity", "bleu"};
  ordered_json models = ordered_json::array();
  for (const auto& f : families) {
    ordered_json fam;
    fam["name"] = f.name;
    std::vector<SeedRun> runs;
    ordered_json per_seed = ordered_json::array();
    for (const auto& [seed, m] : f.seeds) {
      SeedRun run{seed, {}};
      ordered_json entry;
      entry["seed"] = seed;
      const std::optional<double> vals[] = {m.accuracy, m.perplexity, m.bleu};
      for (int k = 0; k < 3; ++k) {
        if (vals[k]) {
          entry[kMetrics[k]] = *vals[k];
          run.metrics[kMetrics[k]] = *vals[k];
        } else {
          entry[kMetrics[k]] = "n/a";
        }
      }
      per_seed.push_back(entry);
      runs.push_back(std::move(run));
    }
    fam["per_seed"] = per_seed;
    const auto summary = aggregate_seeds(runs);
    ordered_json sum;
    for (const char* key : kMetrics) {
      const auto it = summary.find(key);
      if (it == summary.end()) {
        sum[key] = "n/a";
      } else {
        ordered_json s;
        s["mean"] = it->second.mean;
        if (it->second.stddev) s["std"] = *it->second.stddev;
        s["runs"] = it->second.runs;
        s["formatted"] = it->second.formatted;
        sum[key] = s;
      }
    }
    if (f.correct_at_k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", *f.correct_at_k);
      sum["correct_at_k"] = {{"value", *f.correct_at_k}, {"formatted", buf}};
    } else {
      sum["correct_at_k"] = "n/a";
    }
    fam["summary"] = sum;
    models.push_back(fam);
  }
  doc["models"] = models;

  ordered_json sig = ordered_json::array();
  for (const auto& s : significance) {
    ordered_json e;
    e["pair"] = {s.first, s.second};
    e["metric"] = s.metric;
    if (s.test.sufficient) {
      e["p_value"] = s.test.p_value;
      e["w_plus"] = s.test.w_plus;
      e["n"] = s.test.n;
      e["method"] = s.test.exact ? "exact" : "normal";
    } else {
      e["p_value"] = "insufficient pairs";
      e["n"] = s.test.n;
    }
    sig.push_back(e);
  }
  doc["significance"] = sig;
  return doc.dump(2) + "\n";
}

}  // namespace interaction
