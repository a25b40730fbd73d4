#include "interaction/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace interaction {

namespace {

struct KindInfo {
  ModelKind kind;
  std::string_view name;
};

constexpr KindInfo kKinds[] = {
    {ModelKind::separate, "separate"},
    {ModelKind::mixture, "mixture"},
    {ModelKind::agnostic, "agnostic"},
    {ModelKind::seq2seq_full, "seq2seq_full"},
    {ModelKind::seq2seq_agnostic, "seq2seq_agnostic"},
    {ModelKind::cvae, "cvae"},
    {ModelKind::concvae, "concvae"},
    {ModelKind::interaction_m1, "interaction_m1"},
    {ModelKind::interaction_m2, "interaction_m2"},
    {ModelKind::interaction_m3, "interaction_m3"},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long d = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "concvae";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.kind;
  throw ConfigError("invalid model kind: " + std::string(name));
}

bool is_classifier(ModelKind k) {
  return k == ModelKind::separate || k == ModelKind::mixture || k == ModelKind::agnostic;
}
bool is_seq2seq(ModelKind k) {
  return k == ModelKind::seq2seq_full || k == ModelKind::seq2seq_agnostic;
}
bool has_latent(ModelKind k) {
  return k == ModelKind::cvae || k == ModelKind::concvae || k == ModelKind::interaction_m1 ||
         k == ModelKind::interaction_m2 || k == ModelKind::interaction_m3;
}
bool predicts_label(ModelKind k) {
  return is_classifier(k) || k == ModelKind::interaction_m1 || k == ModelKind::interaction_m2 ||
         k == ModelKind::interaction_m3;
}
bool generates(ModelKind k) { return is_seq2seq(k) || has_latent(k); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

RunConfig RunConfig::paper() { return RunConfig{}; }

RunConfig RunConfig::toy() {
  RunConfig c;
  c.profile = "toy";
  c.model = ModelConfig::toy(0);
  c.training.lr = 1e-3;
  c.training.batch_size = 4;
  c.training.epochs = 20;
  // At beta = 1 the toy CVAE collapses onto its prior and ignores z.
  c.cvae.beta = 0.1;
  c.cvae.latent_dim = 16;
  c.data.min_freq = 1;
  c.data.synth_train = 600;
  c.data.synth_val = 60;
  c.data.synth_test = 60;
  return c;
}

RunConfig RunConfig::profile_defaults(std::string_view profile) {
  if (profile == "paper") return paper();
  if (profile == "toy") return toy();
  throw ConfigError("unknown profile: " + std::string(profile));
}

void RunConfig::apply_kind(ModelKind k) {
  kind = k;
  switch (k) {
    case ModelKind::separate:
      classifier = ClassifierKind::separate;
      break;
    case ModelKind::mixture:
      classifier = ClassifierKind::mixture;
      break;
    case ModelKind::agnostic:
      classifier = ClassifierKind::premise_agnostic;
      break;
    case ModelKind::seq2seq_full:
      generation = GenerationMode::full;
      break;
    case ModelKind::seq2seq_agnostic:
      generation = GenerationMode::agnostic;
      break;
    case ModelKind::cvae:
      cvae.pooling = PoolingKind::bos;
      break;
    case ModelKind::concvae:
      cvae.pooling = PoolingKind::concoder;
      break;
    case ModelKind::interaction_m1:
      cvae.pooling = PoolingKind::concoder;
      variant = PredictorVariant::m1;
      break;
    case ModelKind::interaction_m2:
      cvae.pooling = PoolingKind::concoder;
      variant = PredictorVariant::m2;
      break;
    case ModelKind::interaction_m3:
      cvae.pooling = PoolingKind::concoder;
      variant = PredictorVariant::m3;
      break;
  }
}

void RunConfig::set(const std::string& key, const std::string& v) {
  try {
    if (key == "profile") profile = v;
    else if (key == "model.kind") kind = parse_model_kind(v);
    else if (key == "model.layers") model.layers = to_int(key, v);
    else if (key == "model.hidden") model.hidden = to_int(key, v);
    else if (key == "model.heads") model.heads = to_int(key, v);
    else if (key == "model.ffn") model.ffn = to_int(key, v);
    else if (key == "model.max_pos") model.max_pos = to_int(key, v);
    else if (key == "model.dropout") model.dropout = to_double(key, v);
    else if (key == "classifier.kind") classifier = parse_classifier_kind(v);
    else if (key == "classifier.abs_diff") absolute_difference = to_bool(key, v);
    else if (key == "generator.mode") generation = parse_generation_mode(v);
    else if (key == "cvae.pooling") cvae.pooling = parse_pooling_kind(v);
    else if (key == "cvae.latent_dim") cvae.latent_dim = to_int(key, v);
    else if (key == "cvae.beta") cvae.beta = to_double(key, v);
    else if (key == "cvae.kl_warmup_epochs") cvae.kl_warmup_epochs = to_double(key, v);
    else if (key == "cvae.free_bits") cvae.free_bits = to_double(key, v);
    else if (key == "cvae.reconstruction") cvae.reconstruction = parse_reconstruction(v);
    else if (key == "interaction.variant") variant = parse_predictor_variant(v);
    else if (key == "interaction.lambda") lambda = to_double(key, v);
    else if (key == "training.optimizer") {
      if (v != "adam") throw ConfigError("only the adam optimizer is supported");
    } else if (key == "training.lr") training.lr = to_double(key, v);
    else if (key == "training.beta1") training.beta1 = to_double(key, v);
    else if (key == "training.beta2") training.beta2 = to_double(key, v);
    else if (key == "training.eps") training.eps = to_double(key, v);
    else if (key == "training.batch_size") training.batch_size = to_int(key, v);
    else if (key == "training.epochs") training.epochs = to_int(key, v);
    else if (key == "training.threads") training.threads = to_int(key, v);
    else if (key == "training.seeds") {
      training.seeds.clear();
      for (const auto& s : split_list(v)) training.seeds.push_back(to_int(key, s));
    } else if (key == "data.train") data.train = v;
    else if (key == "data.val") data.val = v;
    else if (key == "data.test") data.test = v;
    else if (key == "data.format") {
      if (v == "jsonl") data.schema.format = SourceFormat::jsonl;
      else if (v == "csv") data.schema.format = SourceFormat::csv;
      else throw ConfigError("data.format must be jsonl or csv");
    } else if (key == "data.delimiter") {
      if (v == "tab" || v == "\\t") data.schema.delimiter = '\t';
      else if (v.size() == 1) data.schema.delimiter = v[0];
      else throw ConfigError("data.delimiter must be one character or 'tab'");
    } else if (key == "data.premise_field") data.schema.premise = v;
    else if (key == "data.hypothesis_field") data.schema.hypothesis = v;
    else if (key == "data.label_field") data.schema.label = v;
    else if (key == "data.explanation_field") data.schema.explanation = v;
    else if (key == "data.explanation_fields") {
      const auto fields = split_list(v);
      if (fields.size() != 3) throw ConfigError("data.explanation_fields needs three names");
      for (int i = 0; i < 3; ++i) data.schema.explanations[i] = fields[i];
    } else if (key == "data.max_len") data.max_len = to_int(key, v);
    else if (key == "data.min_freq") data.min_freq = to_int(key, v);
    else if (key == "data.synth_train") data.synth_train = to_int(key, v);
    else if (key == "data.synth_val") data.synth_val = to_int(key, v);
    else if (key == "data.synth_test") data.synth_test = to_int(key, v);
    else if (key == "data.synth_seed") data.synth_seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "data.synth_artifacts") data.synth_artifacts = to_double(key, v);
    else if (key == "eval.bleu_smoothing") eval.bleu_smoothing = to_bool(key, v);
    else if (key == "eval.annotations") eval.annotations = v;
    else if (key == "eval.correct_k") eval.correct_k = to_int(key, v);
    else if (key == "eval.k_values") {
      eval.k_values.clear();
      for (const auto& s : split_list(v)) eval.k_values.push_back(to_double(key, s));
    } else throw ConfigError("unknown config key: " + key);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

RunConfig RunConfig::parse(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    entries.emplace_back(section.empty() ? key : section + "." + key, value);
  }

  std::string profile = "paper";
  for (const auto& [k, v] : entries)
    if (k == "profile" || k == "run.profile") profile = v;
  RunConfig c = profile_defaults(profile);
  // model.kind goes first so explicit per-kind switches can still override it.
  for (const auto& [k, v] : entries)
    if (k == "model.kind") c.apply_kind(parse_model_kind(v));
  for (const auto& [k, v] : entries) {
    if (k == "profile" || k == "run.profile" || k == "model.kind") continue;
    c.set(k, v);
  }
  return c;
}

RunConfig RunConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse(in);
}

void RunConfig::validate() const {
  if (model.layers < 0 || model.hidden < 1 || model.heads < 1 || model.hidden % model.heads)
    throw ConfigError("model: hidden must be a positive multiple of heads");
  if (model.dropout < 0.0 || model.dropout >= 1.0) throw ConfigError("model.dropout must be in [0,1)");
  if (data.max_len < 3 || data.max_len > model.max_pos)
    throw ConfigError("data.max_len must be in [3, model.max_pos]");
  if (training.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (training.epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (training.seeds.empty()) throw ConfigError("training.seeds must not be empty");
  if (training.lr <= 0.0) throw ConfigError("training.lr must be positive");
  if (data.min_freq < 1) throw ConfigError("data.min_freq must be >= 1");
  if (cvae.beta < 0.0 || cvae.kl_warmup_epochs < 0.0 || cvae.free_bits < 0.0) throw ConfigError("cvae: negative weight");
  if (eval.k_values.empty()) throw ConfigError("eval.k_values must not be empty");
}

std::string RunConfig::render() const {
  std::ostringstream o;
  auto i2s = [](int v) { return std::to_string(v); };
  o << "profile = " << profile << "\n\n";
  o << "[model]\n"
    << "kind = " << model_kind_name(kind) << "\n"
    << "layers = " << model.layers << "\n"
    << "hidden = " << model.hidden << "\n"
    << "heads = " << model.heads << "\n"
    << "ffn = " << model.ffn << "\n"
    << "max_pos = " << model.max_pos << "\n"
    << "dropout = " << fmt_double(model.dropout) << "\n\n";
  o << "[classifier]\n"
    << "kind = " << classifier_kind_name(classifier) << "\n"
    << "abs_diff = " << (absolute_difference ? "true" : "false") << "\n\n";
  o << "[generator]\n"
    << "mode = " << generation_mode_name(generation) << "\n\n";
  o << "[cvae]\n"
    << "pooling = " << pooling_kind_name(cvae.pooling) << "\n"
    << "latent_dim = " << cvae.latent_dim << "\n"
    << "beta = " << fmt_double(cvae.beta) << "\n"
    << "kl_warmup_epochs = " << fmt_double(cvae.kl_warmup_epochs) << "\n"
    << "reconstruction = " << reconstruction_name(cvae.reconstruction) << "\n"
    << "free_bits = " << fmt_double(cvae.free_bits) << "\n\n";
  o << "[interaction]\n"
    << "variant = " << predictor_variant_name(variant) << "\n"
    << "lambda = " << fmt_double(lambda) << "\n\n";
  o << "[training]\n"
    << "optimizer = adam\n"
    << "lr = " << fmt_double(training.lr) << "\n"
    << "beta1 = " << fmt_double(training.beta1) << "\n"
    << "beta2 = " << fmt_double(training.beta2) << "\n"
    << "eps = " << fmt_double(training.eps) << "\n"
    << "batch_size = " << training.batch_size << "\n"
    << "epochs = " << training.epochs << "\n"
    << "seeds = " << join(training.seeds, i2s) << "\n"
    << "threads = " << training.threads << "\n\n";
  o << "[data]\n"
    << "train = " << data.train << "\n"
    << "val = " << data.val << "\n"
    << "test = " << data.test << "\n"
    << "format = " << (data.schema.format == SourceFormat::jsonl ? "jsonl" : "csv") << "\n"
    << "delimiter = " << (data.schema.delimiter == '\t' ? std::string("tab")
                                                        : std::string(1, data.schema.delimiter))
    << "\n"
    << "premise_field = " << data.schema.premise << "\n"
    << "hypothesis_field = " << data.schema.hypothesis << "\n"
    << "label_field = " << data.schema.label << "\n"
    << "explanation_field = " << data.schema.explanation << "\n"
    << "explanation_fields = " << data.schema.explanations[0] << "," << data.schema.explanations[1]
    << "," << data.schema.explanations[2] << "\n"
    << "max_len = " << data.max_len << "\n"
    << "min_freq = " << data.min_freq << "\n"
    << "synth_train = " << data.synth_train << "\n"
    << "synth_val = " << data.synth_val << "\n"
    << "synth_test = " << data.synth_test << "\n"
    << "synth_seed = " << data.synth_seed << "\n"
    << "synth_artifacts = " << fmt_double(data.synth_artifacts) << "\n\n";
  o << "[eval]\n"
    << "bleu_smoothing = " << (eval.bleu_smoothing ? "true" : "false") << "\n"
    << "annotations = " << eval.annotations << "\n"
    << "correct_k = " << eval.correct_k << "\n"
    << "k_values = " << join(eval.k_values, fmt_double) << "\n";
  return o.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a(render()); }

}  // namespace interaction
