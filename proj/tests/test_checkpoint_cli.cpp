#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "reasongr/cli.hpp"
#include "reasongr/error.hpp"
#include "reasongr/io.hpp"
#include "reasongr/synthetic.hpp"
#include "reasongr/training.hpp"

using namespace reasongr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("reasongr_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "reasongr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

const char* kSmallConfig =
    "d_model = 16\nd_ff = 32\nlora_rank = 2\npseudo_queries_per_doc = 3\nmax_epochs = 2\n"
    "batch_size = 16\n";

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  synthetic::CorpusOptions o;
  o.documents = 6;
  auto docs = synthetic::generate_corpus(o);
  training::TrainConfig cfg;
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.lora_rank = 2;
  cfg.pseudo_queries_per_doc = 2;
  cfg.max_epochs = 1;
  auto r = training::train(cfg, docs);
  TempDir dir;
  r.checkpoint.save(dir / "c.json");
  auto back = training::Checkpoint::load(dir / "c.json");
  CHECK(back.to_json() == r.checkpoint.to_json());
  TokenSequence src{5, 6, 7};
  TokenSequence prefix{tok::kBos, 8};
  CHECK(model::forward(back.model, back.adapters, src, prefix) ==
        model::forward(r.checkpoint.model, r.checkpoint.adapters, src, prefix));

  auto j = r.checkpoint.to_json();
  j["format_version"] = 99;
  CHECK_THROWS_AS(training::Checkpoint::from_json(j), SchemaError);
  j = r.checkpoint.to_json();
  j.erase("vocab");
  CHECK_THROWS_AS(training::Checkpoint::from_json(j), SchemaError);
  write(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(training::Checkpoint::load(dir / "bad.json"), ParseError);
  CHECK_THROWS_AS(training::Checkpoint::load(dir / "missing.json"), IoError);
}

TEST_CASE("cli end to end") {
  TempDir dir;
  const std::string corpus = dir / "corpus.json";
  const std::string ckpt = dir / "ckpt.json";
  const std::string cfg = dir / "train.cfg";
  write(cfg, kSmallConfig);

  auto s = run_cli({"synth", "--out", corpus, "--documents", "8", "--seed", "2"});
  REQUIRE(s.code == 0);
  auto in = run_cli({"ingest", "--corpus", corpus});
  CHECK(in.code == 0);
  CHECK(nlohmann::json::parse(in.out).at("documents") == 8);

  auto b = run_cli({"build", "--corpus", corpus, "--config", cfg, "--out", dir / "built"});
  CHECK(b.code == 0);
  CHECK(fs::exists(dir / "built/registry.json"));
  CHECK(fs::exists(dir / "built/vocab.json"));

  auto t = run_cli({"train", "--corpus", corpus, "--config", cfg, "--checkpoint", ckpt, "--seed", "1"});
  REQUIRE(t.code == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".log.jsonl"));

  auto e = run_cli({"eval", "--checkpoint", ckpt, "--split", "test", "--out", dir / "eval"});
  CHECK(e.code == 0);
  CHECK(e.out.rfind("Model,Split,EM,PM,SM,S\n", 0) == 0);
  CHECK(fs::exists(dir / "eval.csv"));
  CHECK(fs::exists(dir / "eval.json"));

  auto c = run_cli({"compare", "--corpus", corpus, "--checkpoint", ckpt, "--split", "test"});
  CHECK(c.code == 0);
  CHECK(c.out.find("\nbm25,test,") != std::string::npos);

  auto q = run_cli({"query", "--checkpoint", ckpt, "what was revenue in 2010"});
  CHECK(q.code == 0);
  CHECK(q.out.find("docid: ") != std::string::npos);

  auto p = run_cli({"prompt-preview", "--count", "3", "--mode", "fewshot", "--seed", "4"});
  CHECK(p.code == 0);
  auto p2 = run_cli({"prompt-preview", "--count", "3", "--mode", "fewshot", "--seed", "4"});
  CHECK(p.out == p2.out);
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  CHECK(run_cli({}).code == cli::kUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(run_cli({"eval", "--no-such-flag"}).code == cli::kUsage);
  auto missing = run_cli({"ingest", "--corpus", dir / "nope.json"});
  CHECK(missing.code == cli::kIo);
  auto j = nlohmann::json::parse(missing.err.substr(missing.err.find('{')));
  CHECK(j.at("exit_code") == cli::kIo);

  write(dir / "bad.json", "[{\"id\": ");
  CHECK(run_cli({"ingest", "--corpus", dir / "bad.json"}).code == cli::kParse);
  write(dir / "schema.json", "[{\"pre_text\": []}]");
  CHECK(run_cli({"ingest", "--corpus", dir / "schema.json"}).code == cli::kSchema);

  auto s = run_cli({"synth", "--out", dir / "c.json", "--documents", "3"});
  REQUIRE(s.code == 0);
  write(dir / "bad.cfg", "batch_size = 0\n");
  CHECK(run_cli({"train", "--corpus", dir / "c.json", "--config", dir / "bad.cfg", "--checkpoint",
                 dir / "k.json"})
            .code == cli::kConfig);
  CHECK(run_cli({"eval", "--checkpoint", dir / "c.json"}).code == cli::kSchema);
}
