#include "interaction/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "interaction/random.hpp"

namespace interaction {

using nlohmann::json;

std::string_view label_word(Label label) {
  switch (label) {
    case Label::entailment:
      return "entailment";
    case Label::contradiction:
      return "contradiction";
    case Label::neutral:
      return "neutral";
  }
  return "entailment";
}

std::optional<Label> parse_label(std::string_view word) {
  if (word == "entailment") return Label::entailment;
  if (word == "contradiction") return Label::contradiction;
  if (word == "neutral") return Label::neutral;
  return std::nullopt;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val" || name == "dev") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split: " + std::string(name));
}

int explanations_per_record(Split split) { return split == Split::train ? 1 : 3; }

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

void validate_quadruplet(const Quadruplet& q, Split split) {
  if (q.premise.empty()) throw DataError("empty premise");
  if (q.hypothesis.empty()) throw DataError("empty hypothesis");
  const int want = explanations_per_record(split);
  if (static_cast<int>(q.explanations.size()) != want)
    throw DataError("expected " + std::to_string(want) + " explanation(s) for " +
                    std::string(split_name(split)) + ", got " +
                    std::to_string(q.explanations.size()));
  for (const auto& e : q.explanations)
    if (e.empty()) throw DataError("empty explanation");
}

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

namespace {

// A record as a flat field map, independent of the source format.
using RawRecord = std::map<std::string, std::string, std::less<>>;

Quadruplet to_quadruplet(const RawRecord& raw, Split split, const Schema& schema) {
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = raw.find(key);
    if (it == raw.end()) throw DataError("missing field '" + key + "'");
    return it->second;
  };
  Quadruplet q;
  q.premise = tokenize(field(schema.premise));
  q.hypothesis = tokenize(field(schema.hypothesis));
  const std::string& word = field(schema.label);
  auto label = parse_label(word);
  if (!label) throw DataError("unknown label word '" + word + "'");
  q.label = *label;
  if (split == Split::train) {
    if (raw.count(schema.explanation)) {
      q.explanations.push_back(tokenize(raw.find(schema.explanation)->second));
    }
    for (const auto& key : schema.explanations)
      if (raw.count(key) && key != schema.explanation)
        q.explanations.push_back(tokenize(raw.find(key)->second));
  } else {
    for (const auto& key : schema.explanations)
      if (raw.count(key)) q.explanations.push_back(tokenize(raw.find(key)->second));
  }
  validate_quadruplet(q, split);
  return q;
}

RawRecord json_to_raw(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  RawRecord raw;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) raw[key] = value.get<std::string>();
  }
  return raw;
}

// Splits a CSV stream into records, letting quoted fields span lines.
std::vector<std::pair<std::size_t, std::string>> csv_records(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> records;
  std::string line, pending;
  std::size_t line_no = 0, start_line = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!open) {
      pending = line;
      start_line = line_no;
    } else {
      pending += '\n';
      pending += line;
    }
    const auto quotes = std::count(line.begin(), line.end(), '"');
    if (quotes % 2 == 1) open = !open;
    if (!open) records.emplace_back(start_line, pending);
  }
  if (open) records.emplace_back(start_line, pending);
  return records;
}

}  // namespace

LoadResult parse_quadruplets(std::istream& in, Split split, const Schema& schema,
                             const std::string& source_name) {
  LoadResult result;
  std::size_t total = 0;
  auto consume = [&](std::size_t line_no, auto&& make_raw) {
    ++total;
    try {
      result.records.push_back(to_quadruplet(make_raw(), split, schema));
    } catch (const std::exception& e) {
      result.diagnostics.push_back(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  };

  if (schema.format == SourceFormat::jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
        continue;
      consume(line_no, [&] {
        json j;
        try {
          j = json::parse(line);
        } catch (const json::parse_error& e) {
          throw DataError(std::string("invalid JSON: ") + e.what());
        }
        return json_to_raw(j);
      });
    }
  } else {
    auto records = csv_records(in);
    if (records.empty()) throw DataError(source_name + ": missing CSV header");
    const auto header = split_csv_line(records.front().second, schema.delimiter);
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& [line_no, text] = records[r];
      if (text.empty()) continue;
      consume(line_no, [&] {
        const auto fields = split_csv_line(text, schema.delimiter);
        if (fields.size() != header.size())
          throw DataError("expected " + std::to_string(header.size()) + " columns, got " +
                          std::to_string(fields.size()));
        RawRecord raw;
        for (std::size_t i = 0; i < header.size(); ++i) raw[header[i]] = fields[i];
        return raw;
      });
    }
  }

  if (total == 0) throw DataError(source_name + ": no records");
  if (result.diagnostics.size() * 100 > total) {
    std::string msg = source_name + ": rejected " + std::to_string(result.diagnostics.size()) +
                      " of " + std::to_string(total) + " records (limit 1%)";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, result.diagnostics.size()); ++i)
      msg += "\n  " + result.diagnostics[i];
    throw DataError(msg);
  }
  return result;
}

LoadResult load_quadruplets(const std::string& path, Split split, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return parse_quadruplets(in, split, schema, path);
}

Vocabulary Vocabulary::build(std::span<const Quadruplet> corpus, int min_freq) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  std::unordered_map<std::string, long> freq;
  auto count = [&](const Tokens& t) {
    for (const auto& w : t) ++freq[w];
  };
  for (const auto& q : corpus) {
    count(q.premise);
    count(q.hypothesis);
    for (const auto& e : q.explanations) count(e);
  }
  std::vector<std::pair<std::string, long>> entries;
  for (auto& [w, c] : freq) {
    if (c < min_freq) continue;
    if (std::find(special_tokens.begin(), special_tokens.end(), w) != special_tokens.end())
      continue;
    entries.emplace_back(w, c);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens(special_tokens.begin(), special_tokens.end());
  for (auto& [w, c] : entries) tokens.push_back(std::move(w));
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < num_special) throw DataError("vocabulary is missing special tokens");
  for (int i = 0; i < num_special; ++i)
    if (tokens[i] != special_tokens[i])
      throw DataError("vocabulary id " + std::to_string(i) + " must be " +
                      std::string(special_tokens[i]));
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second)
      throw DataError("duplicate vocabulary token: " + v.tokens_[i]);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk : it->second;
}

const std::string& Vocabulary::token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;  // separator
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<int> encode_sequence(const Vocabulary& vocab, const Tokens& tokens, int max_len) {
  if (max_len < 3) throw std::invalid_argument("encode_sequence: max_len must be >= 3");
  const std::size_t keep = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_len - 2));
  std::vector<int> ids;
  ids.reserve(keep + 2);
  ids.push_back(Vocabulary::bos);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(Vocabulary::eos);
  return ids;
}

Tokens decode_sequence(const Vocabulary& vocab, std::span<const int> ids) {
  Tokens out;
  for (int id : ids) {
    if (id == Vocabulary::pad || id == Vocabulary::bos) continue;
    if (id == Vocabulary::eos) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

Example encode_example(const Vocabulary& vocab, const Quadruplet& q, int max_len) {
  Example ex;
  ex.premise = encode_sequence(vocab, q.premise, max_len);
  ex.hypothesis = encode_sequence(vocab, q.hypothesis, max_len);
  for (const auto& e : q.explanations) ex.explanations.push_back(encode_sequence(vocab, e, max_len));
  ex.label = static_cast<int>(q.label);
  return ex;
}

std::vector<Example> encode_corpus(const Vocabulary& vocab, std::span<const Quadruplet> corpus,
                                   int max_len) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& q : corpus) out.push_back(encode_example(vocab, q, max_len));
  return out;
}

PaddedIds PaddedIds::from_rows(const std::vector<const std::vector<int>*>& rows) {
  PaddedIds p;
  p.rows = static_cast<int>(rows.size());
  for (const auto* r : rows) p.cols = std::max(p.cols, static_cast<int>(r->size()));
  p.ids.assign(static_cast<std::size_t>(p.rows) * p.cols, Vocabulary::pad);
  p.mask.assign(p.ids.size(), 0);
  for (int i = 0; i < p.rows; ++i) {
    const auto& r = *rows[i];
    for (std::size_t j = 0; j < r.size(); ++j) {
      p.ids[static_cast<std::size_t>(i) * p.cols + j] = r[j];
      p.mask[static_cast<std::size_t>(i) * p.cols + j] = 1;
    }
  }
  return p;
}

std::vector<int> PaddedIds::row(int r) const {
  std::vector<int> out;
  for (int j = 0; j < cols; ++j) {
    const std::size_t k = static_cast<std::size_t>(r) * cols + j;
    if (mask[k]) out.push_back(ids[k]);
  }
  return out;
}

Example Batch::example(int i) const {
  Example ex;
  ex.premise = premise.row(i);
  ex.hypothesis = hypothesis.row(i);
  for (const auto& e : explanations) ex.explanations.push_back(e.row(i));
  ex.label = labels[i];
  return ex;
}

std::vector<Example> Batch::examples() const {
  std::vector<Example> out;
  out.reserve(labels.size());
  for (int i = 0; i < size(); ++i) out.push_back(example(i));
  return out;
}

std::vector<Batch> make_batches(std::span<const Example> corpus, int batch_size,
                                std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  portable_shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Batch b;
    std::vector<const std::vector<int>*> prem, hyp;
    std::size_t refs = SIZE_MAX;
    for (std::size_t k = start; k < end; ++k) {
      const auto& ex = corpus[order[k]];
      b.indices.push_back(order[k]);
      prem.push_back(&ex.premise);
      hyp.push_back(&ex.hypothesis);
      b.labels.push_back(ex.label);
      refs = std::min(refs, ex.explanations.size());
    }
    b.premise = PaddedIds::from_rows(prem);
    b.hypothesis = PaddedIds::from_rows(hyp);
    for (std::size_t r = 0; r < refs; ++r) {
      std::vector<const std::vector<int>*> rows;
      for (std::size_t k = start; k < end; ++k) rows.push_back(&corpus[order[k]].explanations[r]);
      b.explanations.push_back(PaddedIds::from_rows(rows));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<Batch> make_batches(std::span<const Quadruplet> corpus, const Vocabulary& vocab,
                                int batch_size, std::uint64_t seed, int max_len) {
  const auto encoded = encode_corpus(vocab, corpus, max_len);
  return make_batches(std::span<const Example>(encoded), batch_size, seed);
}

namespace {

const std::vector<std::string> kSubjects = {
    "man",     "woman",  "boy",     "girl",    "child",   "dog",     "cat",    "chef",
    "farmer",  "doctor", "student", "teacher", "pilot",   "singer",  "dancer", "worker",
    "player",  "artist", "driver",  "baker",   "nurse",   "soldier", "clown",  "tourist",
    "fisher",  "hiker",  "runner",  "writer",  "builder", "painter", "guard",  "priest",
    "surfer",  "skier",  "golfer",  "monk"};

const std::vector<std::string> kVerbs = {
    "running",  "sleeping", "eating",   "swimming", "reading",  "singing",  "dancing",
    "cooking",  "painting", "climbing", "jumping",  "walking",  "sitting",  "writing",
    "driving",  "laughing", "crying",   "fishing",  "skating",  "working",  "playing",
    "resting",  "talking",  "waiting",  "sewing",   "digging",  "praying",  "knitting",
    "shouting", "drawing",  "rowing",   "baking",   "kneeling", "yawning",  "smiling",
    "sneezing"};

const std::vector<std::string> kPlaces = {
    "park",   "beach",   "kitchen", "street",  "garden",   "forest", "library", "school",
    "river",  "field",   "market",  "station", "office",   "stadium", "lake",   "mountain",
    "city",   "village", "house",   "shop",    "road",     "yard",   "bridge",  "hall",
    "church", "museum",  "harbor",  "desert",  "hospital", "castle", "zoo",     "farm",
    "temple", "airport", "theater", "gym"};

const std::vector<std::string> kModifiers = {"today", "now", "quietly", "happily",
                                             "slowly", "calmly", "loudly", "early"};

const std::array<std::string, 3> kCues = {"definitely", "never", "probably"};

struct Slots {
  std::string subj, subj2, verb, verb2, place;
};

Tokens words(std::initializer_list<std::string_view> parts) {
  Tokens out;
  for (auto p : parts) {
    auto t = tokenize(p);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

// Paraphrase templates per label; every entailment template names the verb.
std::vector<Tokens> explanation_templates(Label label, const Slots& s) {
  switch (label) {
    case Label::entailment:
      return {words({"the", s.subj, "is", s.verb, "in the", s.place, "in both sentences"}),
              words({"the premise says the", s.subj, "is", s.verb, "in the", s.place}),
              words({"a", s.subj, s.verb, "in the", s.place, "is a", s.subj, s.verb, "there"}),
              words({"both sentences describe a", s.subj, s.verb})};
    case Label::contradiction:
      return {words({"the", s.subj, "cannot be", s.verb, "and", s.verb2, "at the same time"}),
              words({"the", s.subj, "is either", s.verb, "or", s.verb2}),
              words({s.verb, "is not", s.verb2}),
              words({"a", s.subj, "who is", s.verb, "is not", s.verb2})};
    case Label::neutral:
      return {words({"a", s.subj, "is not necessarily a", s.subj2}),
              words({"the premise is about a", s.subj, ", not a", s.subj2}),
              words({"we do not know if a", s.subj2, "is", s.verb}),
              words({"the", s.subj2, "is not mentioned in the premise"})};
  }
  return {};
}

template <typename T>
const T& pick(const std::vector<T>& pool, std::mt19937_64& rng) {
  return pool[uniform_index(rng, pool.size())];
}

template <typename T>
const T& pick_other(const std::vector<T>& pool, const T& avoid, std::mt19937_64& rng) {
  for (;;) {
    const T& v = pick(pool, rng);
    if (v != avoid) return v;
  }
}

}  // namespace

std::vector<Quadruplet> synth_corpus(int n, std::uint64_t seed, const SynthOptions& options) {
  if (n < 1) throw std::invalid_argument("synth_corpus: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Label> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = static_cast<Label>(i % kNumLabels);
  portable_shuffle(labels.begin(), labels.end(), rng);

  std::vector<Quadruplet> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Slots s;
    s.subj = pick(kSubjects, rng);
    s.verb = pick(kVerbs, rng);
    s.place = pick(kPlaces, rng);
    s.subj2 = pick_other(kSubjects, s.subj, rng);
    s.verb2 = pick_other(kVerbs, s.verb, rng);
    const Label label = labels[i];

    std::string modifier = pick(kModifiers, rng);
    if (options.artifact_strength > 0.0 && unit_uniform(rng) < options.artifact_strength)
      modifier = kCues[static_cast<int>(label)];

    const std::string& h_subj = label == Label::neutral ? s.subj2 : s.subj;
    const std::string& h_verb = label == Label::contradiction ? s.verb2 : s.verb;

    Quadruplet q;
    q.premise = words({"a", s.subj, "is", s.verb, "in the", s.place, "."});
    q.hypothesis = words({"a", h_subj, "is", h_verb, "in the", s.place, modifier, "."});
    q.label = label;

    auto templates = explanation_templates(label, s);
    portable_shuffle(templates.begin(), templates.end(), rng);
    const int refs = explanations_per_record(options.split);
    q.explanations.assign(templates.begin(), templates.begin() + refs);
    out.push_back(std::move(q));
  }
  return out;
}

void write_quadruplets_jsonl(std::ostream& out, std::span<const Quadruplet> corpus) {
  for (const auto& q : corpus) {
    json j;
    j["premise"] = join_tokens(q.premise);
    j["hypothesis"] = join_tokens(q.hypothesis);
    j["label"] = std::string(label_word(q.label));
    if (q.explanations.size() == 1) {
      j["explanation"] = join_tokens(q.explanations[0]);
    } else {
      for (std::size_t i = 0; i < q.explanations.size(); ++i)
        j["explanation_" + std::to_string(i + 1)] = join_tokens(q.explanations[i]);
    }
    out << j.dump() << '\n';
  }
}

}  // namespace interaction
