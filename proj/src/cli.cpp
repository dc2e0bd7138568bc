#include "reasongr/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "reasongr/corpus.hpp"
#include "reasongr/error.hpp"
#include "reasongr/io.hpp"
#include "reasongr/synthetic.hpp"
#include "reasongr/training.hpp"

namespace reasongr::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 ok, 1 internal, 2 usage, 3 io, 4 parse, 5 schema, 6 config, 7 training.\n"
    "Errors print one line: {\"error\":kind,\"exit_code\":n,\"message\":text}";

struct Options {
  std::string corpus;
  std::string config;
  std::string checkpoint;
  std::string split = "test";
  std::string mode;
  std::string out;
  std::string penalty_weights;
  std::string query;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t beam = 1;
  bool unconstrained = false;
  std::size_t count = 3;
  std::size_t documents = 50;
  std::size_t companies = 0;
};

training::TrainConfig load_config(const Options& o) {
  training::TrainConfig c;
  if (!o.config.empty()) c = training::TrainConfig::parse(io::read_file(o.config));
  if (o.seed_set) c.seed = o.seed;
  if (!o.mode.empty()) c.mode = prompts::parse_mode(o.mode);
  if (!o.penalty_weights.empty()) c.penalty_weights = training::parse_penalty_weights(o.penalty_weights);
  c.validate();
  return c;
}

training::Checkpoint load_checkpoint(const Options& o) {
  auto ckpt = training::Checkpoint::load(o.checkpoint);
  if (o.seed_set) ckpt.config.seed = o.seed;
  return ckpt;
}

prompts::PromptMode mode_for(const Options& o, const training::Checkpoint& ckpt) {
  return o.mode.empty() ? ckpt.config.mode : prompts::parse_mode(o.mode);
}

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<corpus::IngestWarning> warnings;
  const auto docs = corpus::ingest_corpus(o.corpus, &warnings);
  std::size_t cells = 0, interior = 0, questions = 0;
  for (const auto& d : docs) {
    for (const auto& row : d.table) cells += row.size();
    interior += corpus::flatten_table(d).size();
    questions += d.question ? 1 : 0;
  }
  for (const auto& w : warnings) err << "warning: element " << w.index << " (" << w.raw_id << "): " << w.message << '\n';
  json stats{{"documents", docs.size()},
             {"table_cells", cells},
             {"interior_cells", interior},
             {"questions", questions},
             {"warnings", warnings.size()}};
  out << stats.dump() << '\n';
  return kOk;
}

int cmd_build(const Options& o, std::ostream& out) {
  const auto config = load_config(o);
  const auto docs = corpus::ingest_corpus(o.corpus);
  const auto registry = corpus::DocIdRegistry::build(docs, config.keywords_per_docid);
  const auto queries =
      training::build_queries(docs, registry, config.pseudo_queries_per_doc, config.seed);
  std::vector<std::string> texts;
  for (auto t : prompts::kTaskTemplates) texts.emplace_back(t);
  for (auto t : prompts::kCotInstructions) texts.emplace_back(t);
  texts.emplace_back("Query: Document ID: find the relevant report company year");
  for (const auto& q : queries) texts.push_back(q.text);
  const auto vocab = tok::Vocab::build(docs, registry, texts);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  io::write_file_atomic(dir / "registry.json", registry.export_json().dump(2));
  io::write_file_atomic(dir / "vocab.json", vocab.to_json().dump());
  out << json{{"docids", registry.size()}, {"vocab", vocab.size()}}.dump() << '\n';
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto config = load_config(o);
  const auto docs = corpus::ingest_corpus(o.corpus);
  std::string log_lines;
  auto result = training::train(config, docs, [&](const training::EpochLog& e) {
    const std::string line = e.to_json().dump();
    log_lines += line + '\n';
    err << line << '\n';
  });
  result.checkpoint.save(o.checkpoint);
  const fs::path log_path = o.out.empty() ? fs::path(o.checkpoint + ".log.jsonl") : fs::path(o.out);
  io::write_file_atomic(log_path, log_lines);
  out << json{{"checkpoint", o.checkpoint}, {"best_epoch", result.checkpoint.epoch},
              {"epochs", result.log.size()}, {"log", log_path.string()}}
             .dump()
      << '\n';
  return kOk;
}

void emit_report(const Options& o, std::ostream& out, const std::string& csv,
                 const json& report) {
  out << csv;
  if (!o.out.empty()) {
    io::write_file_atomic(o.out + ".csv", csv);
    io::write_file_atomic(o.out + ".json", report.dump(2));
  }
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto split = training::parse_split(o.split);
  if (o.beam < 1) throw ConfigError("--beam must be at least 1");
  const auto ckpt = load_checkpoint(o);
  const auto mode = mode_for(o, ckpt);
  training::EvalOptions eo;
  eo.beam = o.beam;
  eo.unconstrained = o.unconstrained;
  const auto report = training::evaluate(ckpt, split, mode, eo);
  std::string csv = std::string(metrics::kCsvHeader) + '\n' +
                    metrics::csv_row("reasongr", o.split, report) + '\n';
  json j = report.to_json();
  j["mode"] = std::string(prompts::to_string(mode));
  if (o.unconstrained) j["validity_rate"] = training::validity_rate(report, ckpt.registry);
  emit_report(o, out, csv, j);
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const auto split = training::parse_split(o.split);
  if (o.beam < 1) throw ConfigError("--beam must be at least 1");
  const auto ckpt = load_checkpoint(o);
  const auto docs = corpus::ingest_corpus(o.corpus);
  const auto mode = mode_for(o, ckpt);
  training::EvalOptions eo;
  eo.beam = o.beam;
  const auto bm25 = training::evaluate_bm25(ckpt, docs, split);
  const auto model = training::evaluate(ckpt, split, mode, eo);
  std::string csv = std::string(metrics::kCsvHeader) + '\n' +
                    metrics::csv_row("bm25", o.split, bm25) + '\n' +
                    metrics::csv_row("reasongr", o.split, model) + '\n';
  emit_report(o, out, csv, json{{"bm25", bm25.to_json()}, {"reasongr", model.to_json()}});
  return kOk;
}

int cmd_query(const Options& o, std::ostream& out) {
  if (o.beam < 1) throw ConfigError("--beam must be at least 1");
  const auto ckpt = load_checkpoint(o);
  const auto mode = mode_for(o, ckpt);
  const auto [trace, surface] = training::answer_query(ckpt, o.query, mode, o.beam);
  if (prompts::uses_cot(mode)) out << "trace: " << trace << '\n';
  out << "docid: " << surface << '\n';
  return kOk;
}

int cmd_prompt_preview(const Options& o, std::ostream& out) {
  const auto mode = o.mode.empty() ? prompts::PromptMode::plain : prompts::parse_mode(o.mode);
  const std::string query =
      o.query.empty() ? "what was the change in net revenue for ACME in 2009?" : o.query;
  const std::vector<prompts::FewShotExample> shots = {
      {"how did BOLTRON report goodwill in 2011?", "boltron-2011-goodwill-impairment-leases"},
      {"what was the operating income in 2008 for CAVEX?", "cavex-2008-pension-hedging-tariffs"}};
  const corpus::DocId gold = corpus::DocId::parse("acme-2009-revenue-hedging-leases");
  Rng rng(o.seed);
  for (std::size_t i = 0; i < o.count; ++i) {
    auto sample = prompts::compose_prompt(rng, query, mode, shots);
    std::vector<std::string> trace;
    if (prompts::uses_cot(mode)) trace = prompts::synthesize_trace(query, gold);
    json line{{"template_id", sample.template_id},
              {"input", sample.input_text},
              {"target", prompts::format_target(gold, trace, mode)}};
    if (sample.cot_id) line["cot_id"] = *sample.cot_id;
    out << line.dump() << '\n';
  }
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  synthetic::CorpusOptions so;
  so.documents = o.documents;
  so.companies = o.companies;
  if (o.seed_set) so.seed = o.seed;
  const auto docs = synthetic::generate_corpus(so);
  io::write_file_atomic(o.out, corpus::to_json(docs).dump(1));
  out << json{{"documents", docs.size()}, {"out", o.out}}.dump() << '\n';
  return kOk;
}

int fail(std::ostream& err, const char* kind, int code, const std::string& message) {
  err << json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative document retrieval with LoRA-adapted seq2seq docid generation"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);
  Options o;

  auto seed_flag = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { o.seed = s; o.seed_set = true; }, "RNG seed");
  };
  auto mode_flag = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "Prompt mode")
        ->check(CLI::IsMember({"plain", "fewshot", "cot", "fewshot_cot"}));
  };
  auto split_flag = [&](CLI::App* sub) {
    sub->add_option("--split", o.split, "Query split")->check(CLI::IsMember({"train", "val", "test"}));
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print statistics");
  ingest->add_option("--corpus", o.corpus, "Corpus JSON")->required();

  auto* build = app.add_subcommand("build", "Write the docid registry and vocabulary");
  build->add_option("--corpus", o.corpus, "Corpus JSON")->required();
  build->add_option("--config", o.config, "Training config (key = value)");
  build->add_option("--out", o.out, "Output directory")->required();
  seed_flag(build);

  auto* train = app.add_subcommand("train", "Train adapters and save the best checkpoint");
  train->add_option("--corpus", o.corpus, "Corpus JSON")->required();
  train->add_option("--config", o.config, "Training config (key = value)");
  train->add_option("--checkpoint", o.checkpoint, "Checkpoint output path")->required();
  train->add_option("--out", o.out, "Training log path (JSON lines)");
  train->add_option("--penalty-weights", o.penalty_weights, "w_em,w_pm,w_sm,w_s");
  seed_flag(train);
  mode_flag(train);

  auto* eval = app.add_subcommand("eval", "Score one split; prints Model,Split,EM,PM,SM,S CSV");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  eval->add_option("--out", o.out, "Output prefix for .csv and .json");
  eval->add_option("--beam", o.beam, "Beam width");
  eval->add_flag("--unconstrained", o.unconstrained, "Free decoding; reports validity rate");
  split_flag(eval);
  mode_flag(eval);
  seed_flag(eval);

  auto* compare = app.add_subcommand("compare", "BM25 and model rows on one split");
  compare->add_option("--corpus", o.corpus, "Corpus JSON")->required();
  compare->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  compare->add_option("--out", o.out, "Output prefix for .csv and .json");
  compare->add_option("--beam", o.beam, "Beam width");
  split_flag(compare);
  mode_flag(compare);
  seed_flag(compare);

  auto* query = app.add_subcommand("query", "Decode one query string");
  query->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  query->add_option("text", o.query, "Query text")->required();
  query->add_option("--beam", o.beam, "Beam width");
  mode_flag(query);
  seed_flag(query);

  auto* preview = app.add_subcommand("prompt-preview", "Print composed prompts for a seed");
  preview->add_option("--query", o.query, "Query text");
  preview->add_option("--count", o.count, "Number of prompts");
  mode_flag(preview);
  seed_flag(preview);

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--out", o.out, "Corpus JSON output")->required();
  synth->add_option("--documents", o.documents, "Document count");
  synth->add_option("--companies", o.companies, "Distinct issuers (0: one per document)");
  seed_flag(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    return fail(err, "usage", kUsage, e.what());
  }

  try {
    if (*ingest) return cmd_ingest(o, out, err);
    if (*build) return cmd_build(o, out);
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out);
    if (*compare) return cmd_compare(o, out);
    if (*query) return cmd_query(o, out);
    if (*preview) return cmd_prompt_preview(o, out);
    if (*synth) return cmd_synth(o, out);
    return fail(err, "usage", kUsage, "no command given");
  } catch (const IoError& e) {
    return fail(err, "io", kIo, e.what());
  } catch (const ParseError& e) {
    return fail(err, "parse", kParse, e.what());
  } catch (const SchemaError& e) {
    return fail(err, "schema", kSchema, e.what());
  } catch (const ConfigError& e) {
    return fail(err, "config", kConfig, e.what());
  } catch (const TrainingError& e) {
    return fail(err, "training", kTraining, e.what());
  } catch (const std::exception& e) {
    return fail(err, "internal", kInternal, e.what());
  }
}

}  // namespace reasongr::cli
