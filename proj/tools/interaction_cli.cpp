// Command-line front end: train, eval, generate, interpolate, classify,
// params, synth. Data goes to stdout, logs to stderr.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "interaction/checkpoint.hpp"
#include "interaction/config.hpp"
#include "interaction/evaluation.hpp"
#include "interaction/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace interaction;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInputError = 2, kCheckpointError = 3 };

RunConfig build_config(const std::string& path, const std::string& profile, const std::string& kind,
                       const std::vector<std::string>& overrides) {
  RunConfig c = path.empty() ? RunConfig::profile_defaults(profile) : RunConfig::load(path);
  if (!kind.empty()) c.apply_kind(parse_model_kind(kind));
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

std::string default_vocab_path(const std::string& checkpoint) {
  // <out>/seed_<s>/checkpoint.bin -> <out>/vocab.txt
  return (fs::path(checkpoint).parent_path().parent_path() / "vocab.txt").string();
}

struct Loaded {
  Vocabulary vocab;
  RunConfig config;
  Checkpoint ckpt;
  std::unique_ptr<Model> model;
};

Loaded load_model(const std::string& checkpoint, std::string vocab_path) {
  if (vocab_path.empty()) vocab_path = default_vocab_path(checkpoint);
  Loaded l;
  l.ckpt = load_checkpoint(checkpoint);
  try {
    l.vocab = Vocabulary::load(vocab_path);
  } catch (const DataError& e) {
    throw CheckpointError(std::string("vocabulary: ") + e.what());
  }
  l.model = model_from_checkpoint(l.ckpt, l.vocab, &l.config);
  omp_set_num_threads(std::max(1, l.config.training.threads));
  return l;
}

// Reads {"premise": ..., "hypothesis": ...} lines. Both fields are required.
template <typename Fn>
void for_each_input(const std::string& path, const Vocabulary& vocab, int max_len, Fn&& fn) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (path != "-") {
    file.open(path);
    if (!file) throw DataError("cannot open input: " + path);
    in = &file;
  }
  std::string line;
  int lineno = 0;
  while (std::getline(*in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("input line " + std::to_string(lineno) + ": " + e.what());
    }
    for (const char* key : {"premise", "hypothesis"})
      if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
        throw DataError("input line " + std::to_string(lineno) + ": missing " + key);
    Example ex;
    ex.premise = encode_sequence(vocab, tokenize(j["premise"].get<std::string>()), max_len);
    ex.hypothesis = encode_sequence(vocab, tokenize(j["hypothesis"].get<std::string>()), max_len);
    if (j.contains("explanation") && j["explanation"].is_string())
      ex.explanations.push_back(
          encode_sequence(vocab, tokenize(j["explanation"].get<std::string>()), max_len));
    fn(lineno - 1, ex, j);
  }
}

std::vector<double> parse_k_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" ", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad k value: " + item);
    }
  }
  if (out.empty()) throw ConfigError("k-values list is empty");
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint label prediction and explanation generation for NLI"};
  app.require_subcommand(1);

  // Shared config flags.
  std::string config_path, profile = "toy", kind;
  std::vector<std::string> overrides;
  auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Config file (key = value sections)");
    sub->add_option("--profile", profile, "Defaults when no config file: toy or paper");
    sub->add_option("--kind", kind, "Model kind");
    sub->add_option("--set", overrides, "Override key=value (repeatable)");
  };

  auto* train = app.add_subcommand("train", "Train one checkpoint per seed");
  std::string out_dir;
  add_config_flags(train);
  train->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints and print an EvalReport");
  std::vector<std::string> checkpoints, annotations;
  std::string vocab_path, data_path;
  eval->add_option("--checkpoint", checkpoints, "Checkpoint files (repeatable)")->required();
  eval->add_option("--vocab", vocab_path, "Vocabulary file (default: next to the run)");
  eval->add_option("--data", data_path, "Test split file (default: from the checkpoint config)");
  eval->add_option("--annotations", annotations, "kind=path annotation file (repeatable)");

  std::string checkpoint, input = "-";
  int max_len = 25;
  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    sub->add_option("--vocab", vocab_path, "Vocabulary file (default: next to the run)");
    sub->add_option("-i,--input", input, "JSONL with premise/hypothesis ('-' for stdin)");
  };

  auto* generate = app.add_subcommand("generate", "Greedy explanation per input");
  add_model_flags(generate);
  generate->add_option("--max-len", max_len, "Maximum generated tokens");

  auto* interpolate = app.add_subcommand("interpolate", "Diverse explanations over the latent");
  std::string k_values = "-2,-1,0,1,2", source = "prior";
  int dimension = -1;
  bool dedupe = false;
  add_model_flags(interpolate);
  interpolate->add_option("--k-values", k_values, "Comma-separated multiples of the std");
  interpolate->add_option("--dimension", dimension, "Shift one latent dimension (-1 = all)");
  interpolate->add_option("--source", source, "prior or posterior (needs an explanation field)")
      ->check(CLI::IsMember({"prior", "posterior"}));
  interpolate->add_option("--max-len", max_len, "Maximum generated tokens");
  interpolate->add_flag("--dedupe", dedupe, "Drop repeated explanations per input");

  auto* classify = app.add_subcommand("classify", "Predict a label per input");
  add_model_flags(classify);

  auto* params = app.add_subcommand("params", "Parameter counts for a model kind");
  int vocab_size = 0;
  add_config_flags(params);
  params->add_option("--vocab-size", vocab_size, "Vocabulary size")->required();

  auto* synth = app.add_subcommand("synth", "Emit a synthetic quadruplet corpus as JSONL");
  int synth_n = 100;
  std::uint64_t synth_seed = 7;
  double artifacts = 0.0;
  std::string split = "train";
  synth->add_option("-n,--records", synth_n, "Record count")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--split", split, "train (1 explanation) or val/test (3)");
  synth->add_option("--artifacts", artifacts, "Hypothesis cue probability")
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*train) {
      const RunConfig c = build_config(config_path, profile, kind, overrides);
      for (const auto& o : run_training(c, out_dir))
        std::cout << json{{"seed", o.seed}, {"checkpoint", o.checkpoint_path}, {"log", o.log_path}}
                         .dump()
                  << '\n';
    } else if (*eval) {
      std::map<std::string, std::string> annotation_files;
      for (const auto& a : annotations) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw ConfigError("--annotations expects kind=path: " + a);
        annotation_files[a.substr(0, eq)] = a.substr(eq + 1);
      }
      std::vector<FamilyInput> families;
      ReportMetadata meta;
      std::uint64_t first_vocab = 0;
      for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        Loaded l = load_model(checkpoints[i], vocab_path);
        if (i == 0) first_vocab = l.vocab.hash();
        else if (l.vocab.hash() != first_vocab)
          throw CheckpointError("checkpoints use different vocabularies");
        RunConfig data_cfg = l.config;
        if (!data_path.empty()) data_cfg.data.test = data_path;
        const Datasets data = load_datasets(data_cfg, &l.vocab);
        if (data.test.empty()) throw DataError("test split is empty");
        if (i == 0) {
          meta.config_hash = hex64(l.config.hash());
          meta.corpus = data_cfg.data.test.empty() ? "synthetic" : data_cfg.data.test;
          meta.examples = static_cast<int>(data.test.size());
          meta.bleu_smoothing = l.config.eval.bleu_smoothing;
          meta.correct_k = l.config.eval.correct_k;
        }
        std::fprintf(stderr, "evaluating %s\n", checkpoints[i].c_str());
        auto metrics = evaluate_model(*l.model, l.vocab, data.test, l.config.data.max_len,
                                      {4, l.config.eval.bleu_smoothing});
        const std::string name = l.ckpt.model_kind;
        auto it = std::find_if(families.begin(), families.end(),
                               [&](const FamilyInput& f) { return f.name == name; });
        if (it == families.end()) {
          families.push_back({name, {}, std::nullopt});
          it = families.end() - 1;
          std::string ann = annotation_files.count(name) ? annotation_files[name] : "";
          if (ann.empty() && checkpoints.size() == 1) ann = l.config.eval.annotations;
          if (!ann.empty())
            it->correct_at_k = correct_at_k(load_annotations(ann), l.config.eval.correct_k);
        }
        it->seeds.emplace_back(static_cast<int>(l.ckpt.seed), std::move(metrics));
      }
      for (auto& f : families)
        std::sort(f.seeds.begin(), f.seeds.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
      const auto sig = compare_families(families);
      std::cout << render_report(meta, families, sig);
    } else if (*generate) {
      Loaded l = load_model(checkpoint, vocab_path);
      if (!generates(l.model->kind()))
        throw std::invalid_argument("model kind does not generate explanations");
      for_each_input(input, l.vocab, l.config.data.max_len, [&](int idx, const Example& ex, const json& in) {
        NoGradGuard no_grad;
        const auto ids = l.model->generate(ex, max_len).value();
        json out{{"index", idx}, {"explanation", join_tokens(decode_sequence(l.vocab, ids))}};
        if (auto label = l.model->predict_label(ex))
          out["label"] = label_word(static_cast<Label>(*label));
        std::cout << out.dump() << '\n';
      });
    } else if (*interpolate) {
      Loaded l = load_model(checkpoint, vocab_path);
      const ConCvae* core = l.model->as_latent();
      if (!core) throw std::invalid_argument("interpolation needs a latent model (cvae, concvae, interaction_*)");
      const auto ks = parse_k_values(k_values);
      InterpolationOptions opts;
      opts.dimension = dimension;
      opts.max_len = max_len;
      opts.source = source == "posterior" ? InterpolationOptions::Source::posterior
                                          : InterpolationOptions::Source::prior;
      if (dimension >= core->latent_dim())
        throw std::invalid_argument("--dimension exceeds the latent size");
      for_each_input(input, l.vocab, l.config.data.max_len, [&](int idx, const Example& ex, const json& in) {
        NoGradGuard no_grad;
        if (opts.source == InterpolationOptions::Source::posterior && ex.explanations.empty())
          throw DataError("posterior interpolation needs an explanation field");
        std::vector<std::vector<int>> outs;
        if (const auto* im = l.model->as_interaction()) {
          outs = im->step_two(ex.premise, ex.hypothesis, ks, opts,
                              ex.explanations.empty() ? std::span<const int>{}
                                                      : std::span<const int>(ex.explanations[0]));
        } else {
          const RunState eval_state;
          const auto x = core->encode_input(ex.premise, ex.hypothesis, eval_state);
          const auto g = opts.source == InterpolationOptions::Source::prior
                             ? core->prior_of(ex.premise, ex.hypothesis)
                             : core->posterior_of(ex.premise, ex.hypothesis, ex.explanations[0]);
          for (const auto& z : interpolation_points(g, ks, dimension))
            outs.push_back(core->decode_with_latent(z, x, max_len));
        }
        const auto label = l.model->predict_label(ex);
        std::vector<std::string> seen;
        for (std::size_t k = 0; k < outs.size(); ++k) {
          const std::string text = join_tokens(decode_sequence(l.vocab, outs[k]));
          if (dedupe) {
            if (std::find(seen.begin(), seen.end(), text) != seen.end()) continue;
            seen.push_back(text);
          }
          json out{{"index", idx}, {"premise", in["premise"]}, {"hypothesis", in["hypothesis"]}};
          if (label) out["label"] = label_word(static_cast<Label>(*label));
          out["k"] = ks[k];
          out["explanation"] = text;
          std::cout << out.dump() << '\n';
        }
      });
    } else if (*classify) {
      Loaded l = load_model(checkpoint, vocab_path);
      if (!predicts_label(l.model->kind()))
        throw std::invalid_argument("model kind does not predict labels");
      for_each_input(input, l.vocab, l.config.data.max_len, [&](int idx, const Example& ex, const json& in) {
        NoGradGuard no_grad;
        const int label = l.model->predict_label(ex).value();
        std::cout << json{{"index", idx}, {"label", label_word(static_cast<Label>(label))}}.dump()
                  << '\n';
      });
    } else if (*params) {
      if (vocab_size < 5) throw std::invalid_argument("--vocab-size must be at least 5");
      const RunConfig c = build_config(config_path, profile, kind, overrides);
      const auto model = make_model(c, vocab_size, 0);
      std::cout << json{{"kind", model_kind_name(c.kind)},
                        {"vocab_size", vocab_size},
                        {"total", model->parameter_count()},
                        {"prediction", model->prediction_parameters()},
                        {"generation", model->generation_parameters()}}
                       .dump()
                << '\n';
    } else if (*synth) {
      SynthOptions opts;
      opts.split = parse_split(split);
      opts.artifact_strength = artifacts;
      write_quadruplets_jsonl(std::cout, synth_corpus(synth_n, synth_seed, opts));
    }
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kCheckpointError;
  } catch (const DataError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
