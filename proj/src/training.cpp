#include "reasongr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reasongr/bm25.hpp"
#include "reasongr/decode.hpp"
#include "reasongr/error.hpp"
#include "reasongr/io.hpp"
#include "reasongr/text.hpp"

namespace reasongr::training {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream for (seed, tag).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t z = seed ^ fnv1a(tag);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "' expects a nonnegative integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

model::ModelDims dims_for(const TrainConfig& config, std::size_t vocab_size) {
  model::ModelDims dims;
  dims.vocab_size = vocab_size;
  dims.d_model = config.d_model;
  dims.d_ff = config.d_ff;
  return dims;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::string gold_surface(const corpus::DocIdRegistry& registry, const Query& q) {
  return registry.docid_for(q.raw_id).surface();
}

// Up to `shots` examples from `pool` whose document differs from `raw_id`.
std::vector<prompts::FewShotExample> pick_examples(std::span<const Query> pool,
                                                   const corpus::DocIdRegistry& registry,
                                                   const std::string& raw_id, std::size_t shots,
                                                   Rng& rng) {
  std::vector<prompts::FewShotExample> out;
  if (pool.empty() || shots == 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const std::size_t attempts = 16 * shots;
  for (std::size_t t = 0; t < attempts && out.size() < shots; ++t) {
    const Query& q = pool[pick(rng)];
    if (q.raw_id == raw_id) continue;
    out.push_back({q.text, registry.docid_for(q.raw_id).surface()});
  }
  return out;
}

TrainingExample retrieval_example(const Query& q, const corpus::DocIdRegistry& registry,
                                  const TrainConfig& config, std::span<const Query> pool,
                                  Rng& rng) {
  const auto& docid = registry.docid_for(q.raw_id);
  std::vector<prompts::FewShotExample> shots;
  if (prompts::uses_fewshot(config.mode)) {
    shots = pick_examples(pool, registry, q.raw_id, config.shots, rng);
  }
  auto sample = prompts::compose_prompt(rng, q.text, config.mode, shots);
  std::vector<std::string> trace;
  if (prompts::uses_cot(config.mode)) trace = prompts::synthesize_trace(q.text, docid);
  TrainingExample ex;
  ex.id = q.id;
  ex.input = std::move(sample.input_text);
  ex.target = prompts::format_target(docid, trace, config.mode);
  ex.kind = ExampleKind::retrieval;
  ex.raw_id = q.raw_id;
  return ex;
}

std::vector<std::string> vocab_prompt_texts(const std::vector<Query>& queries) {
  std::vector<std::string> texts;
  for (auto t : prompts::kTaskTemplates) texts.emplace_back(t);
  for (auto t : prompts::kCotInstructions) texts.emplace_back(t);
  texts.emplace_back("Query: Document ID: find the relevant report company year");
  for (const auto& q : queries) texts.push_back(q.text);
  return texts;
}

// Validation/test scoring shared by train() and evaluate().
metrics::QueryRecord decode_query(const Checkpoint& ckpt, const decode::TokenTrie& trie,
                                  const Query& q, prompts::PromptMode mode,
                                  const EvalOptions& options) {
  const auto sample = eval_prompt(ckpt, q, mode);
  TrainingExample ex;
  ex.input = sample.input_text;
  ex.target = "x";
  const auto src = encode_example(ex, ckpt.vocab, ckpt.model.dims()).src;
  const auto fn = decode::model_logits(ckpt.model, ckpt.adapters, src);

  std::string pred;
  if (options.unconstrained) {
    const std::size_t budget =
        options.max_docid_len + (prompts::uses_cot(mode) ? ckpt.config.cot_free_budget + 1 : 0);
    auto toks = decode::unconstrained_greedy(fn, budget);
    auto sep = std::find(toks.rbegin(), toks.rend(), tok::kSep);
    TokenSequence docid_toks(sep.base(), toks.end());
    pred = tok::decode(docid_toks, ckpt.vocab, "-");
  } else if (prompts::uses_cot(mode)) {
    auto r = decode::cot_decode(fn, trie, ckpt.vocab, ckpt.config.cot_free_budget,
                                options.max_docid_len);
    pred = ckpt.registry.docid(r.docid.docid_index).surface();
  } else if (options.beam > 1) {
    auto beams = decode::constrained_beam(fn, trie, options.beam, options.max_docid_len);
    pred = ckpt.registry.docid(beams.front().docid_index).surface();
  } else {
    auto r = decode::constrained_greedy(fn, trie, options.max_docid_len);
    pred = ckpt.registry.docid(r.docid_index).surface();
  }
  return metrics::score_surfaces(q.id, pred, gold_surface(ckpt.registry, q));
}

std::vector<const Query*> queries_in(const Checkpoint& ckpt, Split split) {
  std::vector<const Query*> out;
  for (const auto& q : ckpt.queries) {
    if (q.split == split) out.push_back(&q);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (pseudo_queries_per_doc < 1) throw ConfigError("pseudo_queries_per_doc must be at least 1");
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!std::isfinite(f) || f < 0.0) throw ConfigError("split fractions must be nonnegative");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (!(lr_a > 0.0) || !std::isfinite(lr_a)) throw ConfigError("lr_a must be positive");
  if (!(lr_ratio > 0.0) || !std::isfinite(lr_ratio)) throw ConfigError("lr_ratio must be positive");
  if (keywords_per_docid < 1) throw ConfigError("keywords_per_docid must be at least 1");
  if (d_model < 2 || d_ff < 1) throw ConfigError("d_model must be at least 2 and d_ff at least 1");
  if (lora_rank < 1 || lora_rank > d_model) {
    throw ConfigError("lora_rank must lie in [1, d_model]");
  }
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be nonnegative (0 disables)");
  loss::validate(penalty_weights);
}

loss::PenaltyWeights parse_penalty_weights(std::string_view csv) {
  const auto parts = text::split(csv, ",");
  if (parts.size() != 4) {
    throw ConfigError("penalty weights expect four comma-separated values w_em,w_pm,w_sm,w_s");
  }
  loss::PenaltyWeights w;
  w.em = parse_double("penalty_weights", trim(parts[0]));
  w.pm = parse_double("penalty_weights", trim(parts[1]));
  w.sm = parse_double("penalty_weights", trim(parts[2]));
  w.s = parse_double("penalty_weights", trim(parts[3]));
  loss::validate(w);
  return w;
}

TrainConfig TrainConfig::parse(std::string_view text, TrainConfig c) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "batch_size") c.batch_size = parse_size(key, value);
    else if (key == "max_epochs") c.max_epochs = parse_size(key, value);
    else if (key == "patience") c.patience = parse_size(key, value);
    else if (key == "seed") c.seed = parse_size(key, value);
    else if (key == "mode") c.mode = prompts::parse_mode(value);
    else if (key == "penalty_weights") c.penalty_weights = parse_penalty_weights(value);
    else if (key == "pseudo_queries_per_doc") c.pseudo_queries_per_doc = parse_size(key, value);
    else if (key == "lr_a") c.lr_a = parse_double(key, value);
    else if (key == "lr_ratio") c.lr_ratio = parse_double(key, value);
    else if (key == "train_fraction") c.train_fraction = parse_double(key, value);
    else if (key == "val_fraction") c.val_fraction = parse_double(key, value);
    else if (key == "test_fraction") c.test_fraction = parse_double(key, value);
    else if (key == "keywords_per_docid") c.keywords_per_docid = parse_size(key, value);
    else if (key == "lora_rank") c.lora_rank = parse_size(key, value);
    else if (key == "d_model") c.d_model = parse_size(key, value);
    else if (key == "d_ff") c.d_ff = parse_size(key, value);
    else if (key == "shots") c.shots = parse_size(key, value);
    else if (key == "cot_free_budget") c.cot_free_budget = parse_size(key, value);
    else if (key == "clip_norm") c.clip_norm = parse_double(key, value);
    else if (key == "quantize") c.quantize = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::parse(std::string_view text) { return parse(text, TrainConfig{}); }

std::string TrainConfig::to_kv() const {
  std::ostringstream os;
  const auto& w = penalty_weights;
  os << "batch_size = " << batch_size << '\n'
     << "max_epochs = " << max_epochs << '\n'
     << "patience = " << patience << '\n'
     << "seed = " << seed << '\n'
     << "mode = " << prompts::to_string(mode) << '\n'
     << "penalty_weights = " << format_double(w.em) << ',' << format_double(w.pm) << ','
     << format_double(w.sm) << ',' << format_double(w.s) << '\n'
     << "pseudo_queries_per_doc = " << pseudo_queries_per_doc << '\n'
     << "lr_a = " << format_double(lr_a) << '\n'
     << "lr_ratio = " << format_double(lr_ratio) << '\n'
     << "train_fraction = " << format_double(train_fraction) << '\n'
     << "val_fraction = " << format_double(val_fraction) << '\n'
     << "test_fraction = " << format_double(test_fraction) << '\n'
     << "keywords_per_docid = " << keywords_per_docid << '\n'
     << "lora_rank = " << lora_rank << '\n'
     << "d_model = " << d_model << '\n'
     << "d_ff = " << d_ff << '\n'
     << "shots = " << shots << '\n'
     << "cot_free_budget = " << cot_free_budget << '\n'
     << "clip_norm = " << format_double(clip_norm) << '\n'
     << "quantize = " << (quantize ? "true" : "false") << '\n';
  return os.str();
}

json TrainConfig::to_json() const {
  const auto& w = penalty_weights;
  return json{{"batch_size", batch_size},
              {"max_epochs", max_epochs},
              {"patience", patience},
              {"seed", seed},
              {"mode", std::string(prompts::to_string(mode))},
              {"penalty_weights", {w.em, w.pm, w.sm, w.s}},
              {"pseudo_queries_per_doc", pseudo_queries_per_doc},
              {"lr_a", lr_a},
              {"lr_ratio", lr_ratio},
              {"train_fraction", train_fraction},
              {"val_fraction", val_fraction},
              {"test_fraction", test_fraction},
              {"keywords_per_docid", keywords_per_docid},
              {"lora_rank", lora_rank},
              {"d_model", d_model},
              {"d_ff", d_ff},
              {"shots", shots},
              {"cot_free_budget", cot_free_budget},
              {"clip_norm", clip_norm},
              {"quantize", quantize}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  try {
    TrainConfig c;
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mode = prompts::parse_mode(j.at("mode").get<std::string>());
    const auto& w = j.at("penalty_weights");
    c.penalty_weights = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                         w.at(3).get<double>()};
    c.pseudo_queries_per_doc = j.at("pseudo_queries_per_doc").get<std::size_t>();
    c.lr_a = j.at("lr_a").get<double>();
    c.lr_ratio = j.at("lr_ratio").get<double>();
    c.train_fraction = j.at("train_fraction").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.test_fraction = j.at("test_fraction").get<double>();
    c.keywords_per_docid = j.at("keywords_per_docid").get<std::size_t>();
    c.lora_rank = j.at("lora_rank").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.shots = j.at("shots").get<std::size_t>();
    c.cot_free_budget = j.at("cot_free_budget").get<std::size_t>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.quantize = j.at("quantize").get<bool>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

// ---------------------------------------------------------------- examples

std::vector<TrainingExample> make_indexing_examples(std::span<const corpus::Document> docs,
                                                    const corpus::DocIdRegistry& registry) {
  std::vector<TrainingExample> out;
  for (const auto& doc : docs) {
    const std::string surface = registry.docid_for(doc.raw_id).surface();
    std::size_t k = 0;
    auto emit = [&](std::string input) {
      TrainingExample ex;
      ex.id = doc.raw_id + "#i" + std::to_string(k++);
      ex.input = std::move(input);
      ex.target = surface;
      ex.kind = ExampleKind::indexing;
      ex.raw_id = doc.raw_id;
      out.push_back(std::move(ex));
    };
    for (const auto* part : {&doc.pre_text, &doc.post_text}) {
      for (const auto& sentence : *part) {
        std::istringstream words(sentence);
        std::vector<std::string> chunk;
        std::string w;
        while (words >> w) {
          chunk.push_back(w);
          if (chunk.size() == kChunkTokens) {
            emit(text::join(chunk, " "));
            chunk.clear();
          }
        }
        if (!chunk.empty()) emit(text::join(chunk, " "));
      }
    }
    for (auto& seg : corpus::flatten_table(doc)) emit(std::move(seg.text));
  }
  return out;
}

std::vector<PseudoQuery> generate_pseudo_queries(const corpus::Document& doc,
                                                 std::span<const std::string> keywords,
                                                 std::size_t n, Rng& rng) {
  if (n == 0) throw ConfigError("generate_pseudo_queries needs n >= 1");
  const auto& t = doc.table;
  const bool has_table = t.size() >= 2 && t.front().size() >= 2;
  const bool has_keywords = !keywords.empty();
  const std::string& company = doc.company;
  const std::string& year = doc.year;

  std::vector<PseudoQuery> out;
  if (!has_table && !has_keywords) {
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({"information about " + company + " " + year + " " + std::to_string(i + 1),
                     {company, year}});
    }
    return out;
  }

  // Templates 0-2 need a table cell, 3-5 a keyword.
  std::vector<int> usable;
  if (has_table) usable.insert(usable.end(), {0, 1, 2});
  if (has_keywords) usable.insert(usable.end(), {3, 4, 5});
  std::uniform_int_distribution<std::size_t> pick_template(0, usable.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_row(1, has_table ? t.size() - 1 : 1);
  std::uniform_int_distribution<std::size_t> pick_col(1, has_table ? t.front().size() - 1 : 1);
  std::uniform_int_distribution<std::size_t> pick_kw(0, has_keywords ? keywords.size() - 1 : 0);

  for (std::size_t i = 0; i < n; ++i) {
    const int which = usable[pick_template(rng)];
    PseudoQuery q;
    if (which <= 2) {
      const std::size_t r = pick_row(rng);
      const std::size_t c = pick_col(rng);
      const std::string& row = t[r].front();
      const std::string& col = t.front()[c];
      switch (which) {
        case 0:
          q.text = "what was the " + row + " in " + year + " for " + company + "?";
          q.fields = {row, year, company};
          break;
        case 1:
          q.text = "how much " + row + " did " + company + " report for " + col + "?";
          q.fields = {row, company, col};
          break;
        default:
          q.text = "what is the value of " + row + " at " + company + " in " + col + "?";
          q.fields = {row, company, col};
          break;
      }
    } else {
      const std::string& kw = keywords[pick_kw(rng)];
      switch (which) {
        case 3:
          q.text = "what did " + company + " disclose about " + kw + " in " + year + "?";
          q.fields = {company, kw, year};
          break;
        case 4:
          q.text = "how is " + kw + " discussed in the " + company + " report?";
          q.fields = {kw, company};
          break;
        default:
          q.text = company + " " + year + " " + kw;
          q.fields = {company, year, kw};
          break;
      }
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Query> build_queries(std::span<const corpus::Document> docs,
                                 const corpus::DocIdRegistry& registry, std::size_t n,
                                 std::uint64_t seed) {
  corpus::KeywordExtractor extractor(docs);
  std::vector<Query> out;
  for (const auto& doc : docs) {
    const auto& docid = registry.docid_for(doc.raw_id);
    std::vector<std::string> keywords;
    for (auto& kw : extractor.extract(corpus::document_text(doc), 6)) {
      if (kw != docid.components[0] && kw != docid.components[1]) keywords.push_back(std::move(kw));
    }
    if (doc.question) {
      out.push_back({doc.raw_id + "#q0", *doc.question, doc.raw_id, true, Split::train});
    }
    Rng rng(derive_seed(seed, doc.raw_id));
    auto pseudo = generate_pseudo_queries(doc, keywords, n, rng);
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      out.push_back({doc.raw_id + "#p" + std::to_string(i + 1), std::move(pseudo[i].text),
                     doc.raw_id, false, Split::train});
    }
  }
  return out;
}

void assign_splits(std::vector<Query>& queries, double train_fraction, double val_fraction,
                   std::uint64_t seed) {
  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(queries.size());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
  const auto n_val =
      std::min(queries.size() - n_train, static_cast<std::size_t>(std::llround(val_fraction * n)));
  for (std::size_t i = 0; i < order.size(); ++i) {
    queries[order[i]].split = i < n_train ? Split::train
                              : i < n_train + n_val ? Split::val
                                                    : Split::test;
  }
}

std::vector<TrainingExample> make_retrieval_examples(std::span<const Query> queries,
                                                     const corpus::DocIdRegistry& registry,
                                                     const TrainConfig& config,
                                                     std::span<const Query> pool, Rng& rng) {
  std::vector<TrainingExample> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(retrieval_example(q, registry, config, pool, rng));
  return out;
}

std::vector<TrainingExample> make_retrieval_examples(std::span<const corpus::Document> docs,
                                                     const corpus::DocIdRegistry& registry,
                                                     const TrainConfig& config) {
  const auto queries = build_queries(docs, registry, config.pseudo_queries_per_doc, config.seed);
  Rng rng(derive_seed(config.seed, "prompts"));
  return make_retrieval_examples(queries, registry, config, queries, rng);
}

EncodedExample encode_example(const TrainingExample& ex, const tok::Vocab& vocab,
                              const model::ModelDims& dims) {
  EncodedExample out;
  out.src = tok::encode(ex.input, vocab);
  if (out.src.size() > dims.max_src_len) {
    out.src.erase(out.src.begin(),
                  out.src.begin() + static_cast<std::ptrdiff_t>(out.src.size() - dims.max_src_len));
  }
  if (out.src.empty()) out.src.push_back(tok::kUnk);
  out.tgt = tok::encode(ex.target, vocab);
  if (out.tgt.size() + 1 > dims.max_tgt_len) {
    throw ConfigError("target of example '" + ex.id + "' exceeds the decoder length limit");
  }
  out.tgt.push_back(tok::kEos);
  return out;
}

// ---------------------------------------------------------------- logging

json EpochLog::deterministic_json() const {
  json j{{"epoch", epoch},
         {"loss", loss},
         {"cross_entropy", cross_entropy},
         {"penalty", penalty},
         {"examples", examples},
         {"improved", improved}};
  if (validation) {
    j["val_em"] = validation->em;
    j["val_pm"] = validation->pm;
    j["val_sm"] = validation->sm;
    j["val_s"] = validation->s_score;
  }
  return j;
}

json EpochLog::to_json() const {
  json j = deterministic_json();
  j["seconds"] = seconds;
  j["samples_per_second"] = samples_per_second;
  if (peak_rss_kib) j["peak_rss_kib"] = *peak_rss_kib;
  return j;
}

// ---------------------------------------------------------------- training

TrainResult train(const TrainConfig& config, std::span<const corpus::Document> docs,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (docs.empty()) throw ConfigError("cannot train on an empty corpus");

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.registry = corpus::DocIdRegistry::build(docs, config.keywords_per_docid);
  ckpt.queries = build_queries(docs, ckpt.registry, config.pseudo_queries_per_doc, config.seed);
  assign_splits(ckpt.queries, config.train_fraction, config.val_fraction, config.seed);
  ckpt.vocab = tok::Vocab::build(docs, ckpt.registry, vocab_prompt_texts(ckpt.queries));

  const auto dims = dims_for(config, ckpt.vocab.size());
  {
    Rng model_rng(derive_seed(config.seed, "model"));
    ckpt.model = model::SeqModel::init(dims, model_rng, {config.quantize, 64});
    Rng adapter_rng(derive_seed(config.seed, "adapters"));
    const auto targets = model::SeqModel::default_adapter_targets();
    ckpt.adapters = model::init_adapters(ckpt.model, targets, config.lora_rank, adapter_rng);
  }
  optim::AdamConfig adam;
  adam.lr_a = config.lr_a;
  adam.lr_ratio = config.lr_ratio;
  ckpt.optimizer = optim::OptimizerState::init(adam, ckpt.adapters);

  std::vector<Query> train_queries;
  std::vector<Query> val_queries;
  for (const auto& q : ckpt.queries) {
    if (q.split == Split::train) train_queries.push_back(q);
    if (q.split == Split::val) val_queries.push_back(q);
  }

  std::vector<EncodedExample> indexing;
  std::vector<std::string> indexing_ids;
  for (const auto& ex : make_indexing_examples(docs, ckpt.registry)) {
    indexing.push_back(encode_example(ex, ckpt.vocab, dims));
    indexing_ids.push_back(ex.id);
  }

  const auto trie = decode::build_token_trie(ckpt.registry, ckpt.vocab);
  EvalOptions eval_options;

  Rng rng(derive_seed(config.seed, "train"));
  TrainResult result;
  Checkpoint best = ckpt;
  double best_pm = -1.0;
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Retrieval prompts are resampled every epoch.
    std::vector<EncodedExample> examples = indexing;
    std::vector<std::string> ids = indexing_ids;
    for (const auto& q : train_queries) {
      const auto ex = retrieval_example(q, ckpt.registry, config, train_queries, rng);
      examples.push_back(encode_example(ex, ckpt.vocab, dims));
      ids.push_back(ex.id);
    }
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch;
    double sum_loss = 0.0, sum_ce = 0.0, sum_p = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size();
         start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      model::Gradients grads;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[order[i]];
        model::TeacherForcedPass pass(ckpt.model, ckpt.adapters, ex.src, ex.tgt);
        const auto pl = loss::penalized_loss(pass.logits(), pass.target(), config.penalty_weights);
        if (!std::isfinite(pl.loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch) + ", example " + ids[order[i]]);
        }
        sum_loss += pl.loss;
        sum_ce += pl.cross_entropy;
        sum_p += pl.penalty;
        pass.backward(pl.penalty * inv, grads);
      }
      if (config.clip_norm > 0.0) optim::clip_global_norm(grads, config.clip_norm);
      optim::adam_step(ckpt.optimizer, ckpt.adapters, grads);
    }
    const auto n = static_cast<double>(examples.size());
    log.examples = examples.size();
    log.loss = sum_loss / n;
    log.cross_entropy = sum_ce / n;
    log.penalty = sum_p / n;

    if (!val_queries.empty()) {
      std::vector<metrics::QueryRecord> records;
      for (const auto& q : val_queries) {
        records.push_back(decode_query(ckpt, trie, q, config.mode, eval_options));
      }
      const auto report = metrics::aggregate(std::move(records));
      log.validation = metrics::Scores{report.em, report.pm, report.sm, report.s_score};
    }
    const double pm = log.validation ? log.validation->pm : -log.loss;
    ckpt.epoch = epoch;
    if (pm > best_pm) {
      best_pm = pm;
      since_improvement = 0;
      log.improved = true;
      ckpt.rng_state = rng_to_string(rng);
      best = ckpt;
    } else {
      ++since_improvement;
    }

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.seconds = secs;
    log.samples_per_second = secs > 0.0 ? n / secs : 0.0;
    log.peak_rss_kib = io::peak_rss_kib();
    if (on_epoch) on_epoch(log);
    result.log.push_back(log);
    if (since_improvement > config.patience) break;
  }
  result.checkpoint = std::move(best);
  return result;
}

TrainResult train(const TrainConfig& config, const std::filesystem::path& corpus_path,
                  const EpochCallback& on_epoch) {
  const auto docs = corpus::ingest_corpus(corpus_path);
  return train(config, docs, on_epoch);
}

// ---------------------------------------------------------------- evaluation

prompts::PromptSample eval_prompt(const Checkpoint& ckpt, const Query& query,
                                  prompts::PromptMode mode) {
  Rng rng(derive_seed(ckpt.config.seed,
                      "eval/" + std::string(prompts::to_string(mode)) + "/" + query.id));
  std::vector<prompts::FewShotExample> shots;
  if (prompts::uses_fewshot(mode)) {
    std::vector<Query> pool;
    for (const auto& q : ckpt.queries) {
      if (q.split == Split::train) pool.push_back(q);
    }
    shots = pick_examples(pool, ckpt.registry, query.raw_id, ckpt.config.shots, rng);
  }
  return prompts::compose_prompt(rng, query.text, mode, shots);
}

metrics::MetricsReport evaluate(const Checkpoint& ckpt, Split split, prompts::PromptMode mode,
                                const EvalOptions& options) {
  const auto queries = queries_in(ckpt, split);
  if (queries.empty()) {
    throw ConfigError("split '" + std::string(to_string(split)) + "' has no queries");
  }
  if (options.beam < 1) throw ConfigError("beam width must be at least 1");
  const auto trie = decode::build_token_trie(ckpt.registry, ckpt.vocab);
  std::vector<metrics::QueryRecord> records;
  for (const auto* q : queries) records.push_back(decode_query(ckpt, trie, *q, mode, options));
  return metrics::aggregate(std::move(records));
}

double validity_rate(const metrics::MetricsReport& report, const corpus::DocIdRegistry& registry) {
  if (report.records.empty()) return 0.0;
  std::size_t valid = 0;
  for (const auto& r : report.records) valid += registry.contains_surface(r.pred_surface) ? 1 : 0;
  return static_cast<double>(valid) / static_cast<double>(report.records.size());
}

metrics::MetricsReport evaluate_bm25(const Checkpoint& ckpt, std::span<const corpus::Document> docs,
                                     Split split) {
  const auto queries = queries_in(ckpt, split);
  if (queries.empty()) {
    throw ConfigError("split '" + std::string(to_string(split)) + "' has no queries");
  }
  const auto index = bm25::InvertedIndex::build(docs);
  std::vector<metrics::QueryRecord> records;
  for (const auto* q : queries) {
    const auto raw = bm25::retrieve_top1(index, docs, q->text);
    records.push_back(metrics::score_surfaces(q->id, ckpt.registry.docid_for(raw).surface(),
                                              gold_surface(ckpt.registry, *q)));
  }
  return metrics::aggregate(std::move(records));
}

std::pair<std::string, std::string> answer_query(const Checkpoint& ckpt, const std::string& query,
                                                 prompts::PromptMode mode, std::size_t beam) {
  Query q{"query", query, "", false, Split::test};
  const auto sample = eval_prompt(ckpt, q, mode);
  TrainingExample ex;
  ex.input = sample.input_text;
  ex.target = "x";
  const auto src = encode_example(ex, ckpt.vocab, ckpt.model.dims()).src;
  const auto fn = decode::model_logits(ckpt.model, ckpt.adapters, src);
  const auto trie = decode::build_token_trie(ckpt.registry, ckpt.vocab);
  const std::size_t max_len = EvalOptions{}.max_docid_len;
  if (prompts::uses_cot(mode)) {
    auto r = decode::cot_decode(fn, trie, ckpt.vocab, ckpt.config.cot_free_budget, max_len);
    return {r.trace, ckpt.registry.docid(r.docid.docid_index).surface()};
  }
  auto beams = decode::constrained_beam(fn, trie, std::max<std::size_t>(beam, 1), max_len);
  return {"", ckpt.registry.docid(beams.front().docid_index).surface()};
}

}  // namespace reasongr::training
