#include <sstream>

#include "reasongr/error.hpp"
#include "reasongr/io.hpp"
#include "reasongr/training.hpp"

namespace reasongr::training {

using nlohmann::json;

namespace {

json linear_to_json(const FrozenLinear& w) {
  if (const auto& q = w.quantized()) {
    return {{"rows", q->rows()},
            {"cols", q->cols()},
            {"block_size", q->block_size()},
            {"scales", q->scales()},
            {"codes", io::to_hex(q->packed_codes())}};
  }
  return {{"dense", io::matrix_to_json(w.weight())}};
}

FrozenLinear linear_from_json(const json& j) {
  if (j.contains("dense")) return FrozenLinear::from_dense(io::matrix_from_json(j.at("dense")));
  return FrozenLinear::from_quantized(QuantizedMatrix::from_parts(
      j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
      j.at("block_size").get<std::size_t>(), j.at("scales").get<std::vector<double>>(),
      io::from_hex(j.at("codes").get<std::string>())));
}

}  // namespace

json Checkpoint::to_json() const {
  const auto& d = model.dims();
  json linears = json::object();
  for (const auto& [name, w] : model.linears()) linears[name] = linear_to_json(w);
  json norms = json::object();
  for (const auto& [name, ln] : model.layer_norms()) {
    norms[name] = {{"gain", io::vector_to_json(ln.gain)}, {"bias", io::vector_to_json(ln.bias)}};
  }
  json adapters_json = json::object();
  for (const auto& [name, ad] : adapters) {
    adapters_json[name] = {{"target", ad.target},
                           {"alpha", ad.alpha},
                           {"a", io::matrix_to_json(ad.a)},
                           {"b", io::matrix_to_json(ad.b)}};
  }
  json queries_json = json::array();
  for (const auto& q : queries) {
    queries_json.push_back({{"id", q.id},
                            {"text", q.text},
                            {"raw_id", q.raw_id},
                            {"gold", q.gold},
                            {"split", std::string(to_string(q.split))}});
  }
  return json{{"format_version", kFormatVersion},
              {"config", config.to_json()},
              {"dims",
               {{"vocab_size", d.vocab_size},
                {"d_model", d.d_model},
                {"d_ff", d.d_ff},
                {"max_src_len", d.max_src_len},
                {"max_tgt_len", d.max_tgt_len}}},
              {"linears", std::move(linears)},
              {"layer_norms", std::move(norms)},
              {"adapters", std::move(adapters_json)},
              {"optimizer", optimizer.to_json()},
              {"vocab", vocab.to_json()},
              {"registry", registry.to_json()},
              {"queries", std::move(queries_json)},
              {"rng_state", rng_state},
              {"epoch", epoch}};
}

Checkpoint Checkpoint::from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw SchemaError("unsupported checkpoint format_version " + std::to_string(version));
    }
    Checkpoint c;
    c.config = TrainConfig::from_json(j.at("config"));
    const auto& dj = j.at("dims");
    model::ModelDims dims;
    dims.vocab_size = dj.at("vocab_size").get<std::size_t>();
    dims.d_model = dj.at("d_model").get<std::size_t>();
    dims.d_ff = dj.at("d_ff").get<std::size_t>();
    dims.max_src_len = dj.at("max_src_len").get<std::size_t>();
    dims.max_tgt_len = dj.at("max_tgt_len").get<std::size_t>();

    std::map<std::string, FrozenLinear> linears;
    for (const auto& [name, lj] : j.at("linears").items()) linears[name] = linear_from_json(lj);
    std::map<std::string, model::LayerNormParams> norms;
    for (const auto& [name, nj] : j.at("layer_norms").items()) {
      norms[name] = {io::vector_from_json(nj.at("gain")), io::vector_from_json(nj.at("bias"))};
    }
    c.model = model::SeqModel::from_parts(dims, std::move(linears), std::move(norms));

    for (const auto& [name, aj] : j.at("adapters").items()) {
      LoraAdapter ad;
      ad.target = aj.at("target").get<std::string>();
      ad.alpha = aj.at("alpha").get<double>();
      ad.a = io::matrix_from_json(aj.at("a"));
      ad.b = io::matrix_from_json(aj.at("b"));
      const auto& w = c.model.linear(ad.target);
      if (static_cast<std::size_t>(ad.a.rows()) != w.out_dim() ||
          static_cast<std::size_t>(ad.b.rows()) != w.in_dim() || ad.a.cols() != ad.b.cols()) {
        throw SchemaError("adapter '" + name + "' does not match its target shape");
      }
      c.adapters[name] = std::move(ad);
    }
    c.optimizer = optim::OptimizerState::from_json(j.at("optimizer"));
    c.vocab = tok::Vocab::from_json(j.at("vocab"));
    if (c.vocab.size() != dims.vocab_size) {
      throw SchemaError("vocabulary size does not match the model dimensions");
    }
    c.registry = corpus::DocIdRegistry::from_json(j.at("registry"));
    for (const auto& qj : j.at("queries")) {
      Query q;
      q.id = qj.at("id").get<std::string>();
      q.text = qj.at("text").get<std::string>();
      q.raw_id = qj.at("raw_id").get<std::string>();
      q.gold = qj.at("gold").get<bool>();
      q.split = parse_split(qj.at("split").get<std::string>());
      c.queries.push_back(std::move(q));
    }
    c.rng_state = j.at("rng_state").get<std::string>();
    c.epoch = j.at("epoch").get<std::size_t>();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, to_json().dump());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what(), e.byte);
  }
  return from_json(j);
}

}  // namespace reasongr::training
