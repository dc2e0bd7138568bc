#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reasongr/bm25.hpp"
#include "reasongr/corpus.hpp"
#include "reasongr/error.hpp"
#include "reasongr/loss.hpp"
#include "reasongr/metrics.hpp"
#include "reasongr/prompts.hpp"
#include "reasongr/quantize.hpp"
#include "reasongr/synthetic.hpp"
#include "reasongr/training.hpp"

namespace py = pybind11;
using namespace reasongr;

namespace {

// Structured values cross the boundary as JSON text; the Python package
// decodes them.
std::vector<corpus::Document> docs_from(const std::string& corpus_json) {
  return corpus::parse_corpus(corpus_json);
}

loss::PenaltyWeights weights_from(const std::vector<double>& w) {
  if (w.size() != 4) throw ConfigError("penalty weights expect four values");
  loss::PenaltyWeights out{w[0], w[1], w[2], w[3]};
  loss::validate(out);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "ReasonGRError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  auto schema = py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<UniquenessError>(m, "UniquenessError", schema.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  m.def("synthetic_corpus", [](std::size_t documents, std::size_t companies, std::uint64_t seed) {
    synthetic::CorpusOptions o;
    o.documents = documents;
    o.companies = companies;
    o.seed = seed;
    return corpus::to_json(synthetic::generate_corpus(o)).dump();
  }, py::arg("documents") = 50, py::arg("companies") = 0, py::arg("seed") = 7);

  m.def("normalize_corpus", [](const std::string& corpus_json) {
    return corpus::to_json(docs_from(corpus_json)).dump();
  }, py::arg("corpus_json"));

  m.def("flatten_table", [](const std::string& corpus_json, std::size_t index) {
    auto docs = docs_from(corpus_json);
    std::vector<std::string> out;
    for (auto& seg : corpus::flatten_table(docs.at(index))) out.push_back(std::move(seg.text));
    return out;
  }, py::arg("corpus_json"), py::arg("index"));

  m.def("build_registry", [](const std::string& corpus_json, std::size_t keywords_per_docid) {
    auto docs = docs_from(corpus_json);
    return corpus::DocIdRegistry::build(docs, keywords_per_docid).to_json().dump();
  }, py::arg("corpus_json"), py::arg("keywords_per_docid") = 3);

  m.def("score", [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    auto s = metrics::score(std::span<const std::string>(pred), std::span<const std::string>(gold));
    return std::vector<double>{s.em, s.pm, s.sm, s.s_score};
  }, py::arg("pred"), py::arg("gold"));

  m.def("penalty_factor", [](const std::vector<TokenId>& pred, const std::vector<TokenId>& gold,
                             const std::vector<double>& weights) {
    return loss::penalty_factor(pred, gold, weights_from(weights));
  }, py::arg("pred"), py::arg("gold"), py::arg("weights"));

  m.def("cross_entropy", [](const Matrix& logits, const std::vector<TokenId>& target) {
    return loss::cross_entropy(logits, target);
  }, py::arg("logits"), py::arg("target"));

  m.def("quantize_roundtrip", [](const Matrix& w, std::size_t block_size) {
    return QuantizedMatrix::quantize(w, block_size).dequantize();
  }, py::arg("weights"), py::arg("block_size") = 64);

  py::class_<bm25::InvertedIndex>(m, "Bm25Index")
      .def(py::init([](const std::vector<std::vector<std::string>>& docs, double k1, double b) {
             return bm25::InvertedIndex::build_from_tokens(docs, {k1, b});
           }),
           py::arg("documents"), py::arg("k1") = 1.5, py::arg("b") = 0.75)
      .def("score",
           [](const bm25::InvertedIndex& idx, const std::vector<std::string>& q, std::size_t doc) {
             if (doc >= idx.doc_count()) throw py::index_error("document index out of range");
             return idx.score(std::span<const std::string>(q), doc);
           },
           py::arg("query"), py::arg("doc"))
      .def("top1",
           [](const bm25::InvertedIndex& idx, const std::vector<std::string>& q) {
             return idx.top1(std::span<const std::string>(q));
           },
           py::arg("query"))
      .def("idf", &bm25::InvertedIndex::idf, py::arg("term"))
      .def("__len__", &bm25::InvertedIndex::doc_count);

  m.attr("TASK_TEMPLATES") = std::vector<std::string>(prompts::kTaskTemplates.begin(),
                                                      prompts::kTaskTemplates.end());
  m.attr("COT_INSTRUCTIONS") = std::vector<std::string>(prompts::kCotInstructions.begin(),
                                                        prompts::kCotInstructions.end());

  m.def("compose_prompt", [](const std::string& query, const std::string& mode, std::uint64_t seed,
                             const std::vector<std::pair<std::string, std::string>>& examples) {
    std::vector<prompts::FewShotExample> shots;
    for (const auto& [q, s] : examples) shots.push_back({q, s});
    Rng rng(seed);
    auto p = prompts::compose_prompt(rng, query, prompts::parse_mode(mode), shots);
    return py::make_tuple(p.input_text, p.template_id, p.cot_id);
  }, py::arg("query"), py::arg("mode") = "plain", py::arg("seed") = 0,
     py::arg("examples") = std::vector<std::pair<std::string, std::string>>{});

  m.def("train", [](const std::string& corpus_json, const std::string& config_text,
                    const std::string& checkpoint_path) {
    auto docs = docs_from(corpus_json);
    auto cfg = training::TrainConfig::parse(config_text);
    training::TrainResult result;
    {
      py::gil_scoped_release release;
      result = training::train(cfg, docs);
    }
    result.checkpoint.save(checkpoint_path);
    nlohmann::json log = nlohmann::json::array();
    for (const auto& l : result.log) log.push_back(l.to_json());
    return log.dump();
  }, py::arg("corpus_json"), py::arg("config_text"), py::arg("checkpoint_path"));

  m.def("evaluate", [](const std::string& checkpoint_path, const std::string& split,
                       const std::string& mode, std::size_t beam) {
    auto ckpt = training::Checkpoint::load(checkpoint_path);
    return training::evaluate(ckpt, training::parse_split(split), prompts::parse_mode(mode),
                              {beam, false, 16})
        .to_json()
        .dump();
  }, py::arg("checkpoint_path"), py::arg("split") = "test", py::arg("mode") = "plain",
     py::arg("beam") = 1);

  m.def("query", [](const std::string& checkpoint_path, const std::string& text,
                    const std::string& mode, std::size_t beam) {
    auto ckpt = training::Checkpoint::load(checkpoint_path);
    return training::answer_query(ckpt, text, prompts::parse_mode(mode), beam);
  }, py::arg("checkpoint_path"), py::arg("text"), py::arg("mode") = "plain", py::arg("beam") = 1);
}
