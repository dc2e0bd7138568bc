#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "reasongr/corpus.hpp"
#include "reasongr/loss.hpp"
#include "reasongr/metrics.hpp"
#include "reasongr/model.hpp"
#include "reasongr/optimizer.hpp"
#include "reasongr/prompts.hpp"
#include "reasongr/tokenizer.hpp"

namespace reasongr::training {

// Keys of the flat key=value config file are exactly these field names.
// penalty_weights is "w_em,w_pm,w_sm,w_s".
struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  prompts::PromptMode mode = prompts::PromptMode::plain;
  loss::PenaltyWeights penalty_weights;
  std::size_t pseudo_queries_per_doc = 10;
  double lr_a = 2e-3;
  double lr_ratio = 16.0;
  double train_fraction = 0.75;
  double val_fraction = 0.10;
  double test_fraction = 0.15;
  std::size_t keywords_per_docid = 3;
  std::size_t lora_rank = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t shots = prompts::kDefaultShots;
  std::size_t cot_free_budget = 24;
  double clip_norm = 1.0;
  bool quantize = true;

  void validate() const;

  // Applies "key = value" lines ('#' starts a comment) on top of `base`.
  static TrainConfig parse(std::string_view text, TrainConfig base);
  static TrainConfig parse(std::string_view text);
  std::string to_kv() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

loss::PenaltyWeights parse_penalty_weights(std::string_view csv);

enum class Split { train, val, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

// A retrieval query: the gold FinQA question or a pseudo-query.
struct Query {
  std::string id;
  std::string text;
  std::string raw_id;
  bool gold = false;
  Split split = Split::train;
};

enum class ExampleKind { indexing, retrieval };

struct TrainingExample {
  std::string id;
  std::string input;
  std::string target;
  ExampleKind kind = ExampleKind::indexing;
  std::string raw_id;
};

inline constexpr std::size_t kChunkTokens = 32;

// Per document: one example per text chunk (each pre/post sentence cut into
// pieces of at most kChunkTokens whitespace words) and one per table segment,
// all mapping bare text to the docid surface.
std::vector<TrainingExample> make_indexing_examples(std::span<const corpus::Document> docs,
                                                    const corpus::DocIdRegistry& registry);

struct PseudoQuery {
  std::string text;
  std::vector<std::string> fields;  // values substituted into the template
};

// n template-instantiated questions built from the keywords, company, year and
// random table cells of `doc`. Without a table and keywords it falls back to
// "information about <company> <year> <i>".
std::vector<PseudoQuery> generate_pseudo_queries(const corpus::Document& doc,
                                                 std::span<const std::string> keywords,
                                                 std::size_t n, Rng& rng);

// Gold question (if any) plus n pseudo-queries per document, in corpus order.
std::vector<Query> build_queries(std::span<const corpus::Document> docs,
                                 const corpus::DocIdRegistry& registry, std::size_t n,
                                 std::uint64_t seed);

// Query-level train/val/test partition; a pure function of (queries, seed).
void assign_splits(std::vector<Query>& queries, double train_fraction, double val_fraction,
                   std::uint64_t seed);

// Wraps each query with compose_prompt (mode from config) and formats its
// target. Few-shot examples come from `pool`, never from the query's own doc.
std::vector<TrainingExample> make_retrieval_examples(std::span<const Query> queries,
                                                     const corpus::DocIdRegistry& registry,
                                                     const TrainConfig& config,
                                                     std::span<const Query> pool, Rng& rng);

// Convenience: every query of every document, pool = those same queries.
std::vector<TrainingExample> make_retrieval_examples(std::span<const corpus::Document> docs,
                                                     const corpus::DocIdRegistry& registry,
                                                     const TrainConfig& config);

// Token form of an example: source truncated to its last max_src_len tokens,
// target = encode(target) + EOS.
struct EncodedExample {
  TokenSequence src;
  TokenSequence tgt;
};
EncodedExample encode_example(const TrainingExample& ex, const tok::Vocab& vocab,
                              const model::ModelDims& dims);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;           // mean penalized loss
  double cross_entropy = 0.0;  // mean CE
  double penalty = 0.0;        // mean P
  std::size_t examples = 0;
  std::optional<metrics::Scores> validation;
  bool improved = false;
  double seconds = 0.0;
  double samples_per_second = 0.0;
  std::optional<long> peak_rss_kib;

  nlohmann::json to_json() const;
  // Everything except wall-clock and memory figures.
  nlohmann::json deterministic_json() const;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  TrainConfig config;
  model::SeqModel model;
  model::AdapterSet adapters;
  optim::OptimizerState optimizer;
  tok::Vocab vocab;
  corpus::DocIdRegistry registry;
  std::vector<Query> queries;
  std::string rng_state;
  std::size_t epoch = 0;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

struct TrainResult {
  Checkpoint checkpoint;  // best validation PM
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const TrainConfig& config, std::span<const corpus::Document> docs,
                  const EpochCallback& on_epoch = {});

TrainResult train(const TrainConfig& config, const std::filesystem::path& corpus_path,
                  const EpochCallback& on_epoch = {});

struct EvalOptions {
  std::size_t beam = 1;
  bool unconstrained = false;
  std::size_t max_docid_len = 16;
};

// Decodes every query of `split` and scores the docid against the gold one.
// CoT modes score only the docid decoded after SEP. Throws ConfigError for an
// empty split.
metrics::MetricsReport evaluate(const Checkpoint& ckpt, Split split, prompts::PromptMode mode,
                                const EvalOptions& options = {});

// Rate of registered docids among the records of an unconstrained evaluation.
double validity_rate(const metrics::MetricsReport& report, const corpus::DocIdRegistry& registry);

// BM25 top-1 over the same split, with the retrieved document's docid surface
// scored against the gold docid.
metrics::MetricsReport evaluate_bm25(const Checkpoint& ckpt, std::span<const corpus::Document> docs,
                                     Split split);

// Composed prompt for one query; evaluation prompts are a pure function of
// (query id, seed, mode).
prompts::PromptSample eval_prompt(const Checkpoint& ckpt, const Query& query, prompts::PromptMode mode);

// Decodes a free-form query string; returns (trace, surface).
std::pair<std::string, std::string> answer_query(const Checkpoint& ckpt, const std::string& query,
                                                 prompts::PromptMode mode, std::size_t beam = 1);

}  // namespace reasongr::training
