#include "reasongr/model.hpp"

#include <cmath>
#include <limits>

#include "reasongr/error.hpp"
#include "reasongr/loss.hpp"
#include "reasongr/tokenizer.hpp"

namespace reasongr::model {
namespace {

constexpr double kLayerNormEps = 1e-6;

std::string join_name(std::string_view block, std::string_view leaf) {
  return std::string(block) + "." + std::string(leaf);
}

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

const LoraAdapter* find_adapter(const AdapterSet& adapters, const std::string& name) {
  auto it = adapters.find(name);
  return it == adapters.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Layer primitives. Each *_forward optionally fills a cache consumed by the
// matching *_backward.

struct LinearCache {
  Matrix x;  // input rows
  Matrix u;  // x * B, only when an adapter is attached
};

Matrix linear_forward(const SeqModel& model, const AdapterSet& adapters, const std::string& name,
                      const Matrix& x, LinearCache* cache) {
  const FrozenLinear& w = model.linear(name);
  const LoraAdapter* ad = find_adapter(adapters, name);
  if (w.in_dim() != static_cast<std::size_t>(x.cols())) {
    throw DimensionError("input width mismatch for '" + name + "'");
  }
  Matrix y = x * w.weight().transpose();
  if (ad) {
    Matrix u = x * ad->b;
    y += ad->scale() * (u * ad->a.transpose());
    if (cache) cache->u = std::move(u);
  }
  if (cache) cache->x = x;
  return y;
}

Matrix linear_backward(const SeqModel& model, const AdapterSet& adapters, const std::string& name,
                       const LinearCache& cache, const Matrix& dy, Gradients& grads) {
  const FrozenLinear& w = model.linear(name);
  Matrix dx = dy * w.weight();
  if (const LoraAdapter* ad = find_adapter(adapters, name)) {
    const double s = ad->scale();
    Matrix du = s * (dy * ad->a);
    auto& g = grads[name];
    if (g.a.size() == 0) {
      g.a = Matrix::Zero(ad->a.rows(), ad->a.cols());
      g.b = Matrix::Zero(ad->b.rows(), ad->b.cols());
    }
    g.a.noalias() += s * (dy.transpose() * cache.u);
    g.b.noalias() += cache.x.transpose() * du;
    dx.noalias() += du * ad->b.transpose();
  }
  return dx;
}

struct LayerNormCache {
  Matrix xhat;
  Vector inv_std;
};

Matrix layer_norm_forward(const LayerNormParams& p, const Matrix& x, LayerNormCache* cache) {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Matrix xhat(n, x.cols());
  Vector inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mean).square().sum() / d;
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * p.gain.transpose().array()).rowwise() +
             p.bias.transpose().array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache, const Matrix& dy) {
  const double d = static_cast<double>(dy.cols());
  Matrix dxhat = dy.array().rowwise() * p.gain.transpose().array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_g = dxhat.row(i).sum() / d;
    const double mean_gx = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.inv_std(i) *
                (dxhat.row(i).array() - mean_g - cache.xhat.row(i).array() * mean_gx);
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;

double gelu(double z) { return 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluK * z * z * z))); }

double gelu_grad(double z) {
  const double t = std::tanh(kGeluC * (z + kGeluK * z * z * z));
  return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluK * z * z);
}

struct FfnCache {
  LinearCache in;
  LinearCache out;
  Matrix pre;  // pre-activation
};

Matrix ffn_forward(const SeqModel& model, const AdapterSet& adapters, std::string_view block,
                   const Matrix& x, FfnCache* cache) {
  Matrix pre = linear_forward(model, adapters, join_name(block, "in"), x, cache ? &cache->in : nullptr);
  Matrix act = pre.unaryExpr([](double z) { return gelu(z); });
  Matrix y = linear_forward(model, adapters, join_name(block, "out"), act,
                            cache ? &cache->out : nullptr);
  if (cache) cache->pre = std::move(pre);
  return y;
}

Matrix ffn_backward(const SeqModel& model, const AdapterSet& adapters, std::string_view block,
                    const FfnCache& cache, const Matrix& dy, Gradients& grads) {
  Matrix dact = linear_backward(model, adapters, join_name(block, "out"), cache.out, dy, grads);
  Matrix dpre = dact.array() * cache.pre.unaryExpr([](double z) { return gelu_grad(z); }).array();
  return linear_backward(model, adapters, join_name(block, "in"), cache.in, dpre, grads);
}

struct AttentionCache {
  LinearCache q_lin, k_lin, v_lin, o_lin;
  Matrix q, k, v, probs;
};

// Single-head scaled dot-product attention. With `causal`, query row i sees
// key rows 0..i only.
Matrix attention_forward(const SeqModel& model, const AdapterSet& adapters, std::string_view block,
                         const Matrix& xq, const Matrix& xkv, bool causal, AttentionCache* cache) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.dims().d_model));
  Matrix q = linear_forward(model, adapters, join_name(block, "q"), xq, cache ? &cache->q_lin : nullptr);
  Matrix k = linear_forward(model, adapters, join_name(block, "k"), xkv, cache ? &cache->k_lin : nullptr);
  Matrix v = linear_forward(model, adapters, join_name(block, "v"), xkv, cache ? &cache->v_lin : nullptr);
  Matrix scores = (q * k.transpose()) * inv_sqrt_d;
  Matrix probs(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const Eigen::Index visible = causal ? std::min<Eigen::Index>(i + 1, scores.cols()) : scores.cols();
    const double mx = scores.row(i).head(visible).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const double e = j < visible ? std::exp(scores(i, j) - mx) : 0.0;
      probs(i, j) = e;
      total += e;
    }
    probs.row(i) /= total;
  }
  Matrix mixed = probs * v;
  Matrix out = linear_forward(model, adapters, join_name(block, "o"), mixed,
                              cache ? &cache->o_lin : nullptr);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
  }
  return out;
}

struct AttentionGrads {
  Matrix dxq;
  Matrix dxkv;
};

AttentionGrads attention_backward(const SeqModel& model, const AdapterSet& adapters,
                                  std::string_view block, const AttentionCache& c,
                                  const Matrix& dout, Gradients& grads) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.dims().d_model));
  Matrix dmixed = linear_backward(model, adapters, join_name(block, "o"), c.o_lin, dout, grads);
  Matrix dprobs = dmixed * c.v.transpose();
  Matrix dv = c.probs.transpose() * dmixed;
  Matrix dscores(dprobs.rows(), dprobs.cols());
  for (Eigen::Index i = 0; i < dprobs.rows(); ++i) {
    const double inner = dprobs.row(i).dot(c.probs.row(i));
    dscores.row(i) = c.probs.row(i).array() * (dprobs.row(i).array() - inner);
  }
  dscores *= inv_sqrt_d;
  Matrix dq = dscores * c.k;
  Matrix dk = dscores.transpose() * c.q;
  AttentionGrads g;
  g.dxq = linear_backward(model, adapters, join_name(block, "q"), c.q_lin, dq, grads);
  g.dxkv = linear_backward(model, adapters, join_name(block, "k"), c.k_lin, dk, grads);
  g.dxkv += linear_backward(model, adapters, join_name(block, "v"), c.v_lin, dv, grads);
  return g;
}

Matrix embed(const SeqModel& model, std::span<const TokenId> ids) {
  const Matrix& table = model.linear(names::kEmbedding).weight();
  const std::size_t d = model.dims().d_model;
  Matrix x = sinusoidal_positions(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw DimensionError("token id outside the vocabulary");
    x.row(static_cast<Eigen::Index>(i)) += table.row(ids[i]);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Whole-network passes.

struct EncoderCache {
  LayerNormCache ln_attn, ln_ffn, ln_final;
  AttentionCache attn;
  FfnCache ffn;
};

Matrix run_encoder(const SeqModel& model, const AdapterSet& adapters, std::span<const TokenId> src,
                   EncoderCache* cache) {
  if (src.empty()) throw ConfigError("source sequence is empty");
  if (src.size() > model.dims().max_src_len) throw ConfigError("source sequence exceeds max_src_len");
  Matrix x0 = embed(model, src);
  Matrix a = layer_norm_forward(model.layer_norm("encoder.ln_attn"), x0, cache ? &cache->ln_attn : nullptr);
  Matrix x1 = x0 + attention_forward(model, adapters, names::kEncSelf, a, a, false,
                                     cache ? &cache->attn : nullptr);
  Matrix b = layer_norm_forward(model.layer_norm("encoder.ln_ffn"), x1, cache ? &cache->ln_ffn : nullptr);
  Matrix x2 = x1 + ffn_forward(model, adapters, names::kEncFfn, b, cache ? &cache->ffn : nullptr);
  return layer_norm_forward(model.layer_norm("encoder.ln_final"), x2, cache ? &cache->ln_final : nullptr);
}

// Accumulates adapter gradients only; embeddings are frozen so d/dx0 is dropped.
void encoder_backward(const SeqModel& model, const AdapterSet& adapters, const EncoderCache& c,
                      const Matrix& dstates, Gradients& grads) {
  Matrix dx2 = layer_norm_backward(model.layer_norm("encoder.ln_final"), c.ln_final, dstates);
  Matrix db = ffn_backward(model, adapters, names::kEncFfn, c.ffn, dx2, grads);
  Matrix dx1 = dx2 + layer_norm_backward(model.layer_norm("encoder.ln_ffn"), c.ln_ffn, db);
  attention_backward(model, adapters, names::kEncSelf, c.attn, dx1, grads);
}

struct DecoderCache {
  LayerNormCache ln_self, ln_cross, ln_ffn, ln_final;
  AttentionCache self_attn, cross_attn;
  FfnCache ffn;
  LinearCache out;
};

Matrix run_decoder(const SeqModel& model, const AdapterSet& adapters, const Matrix& enc,
                   std::span<const TokenId> prefix, DecoderCache* cache) {
  if (prefix.empty()) throw ConfigError("target prefix is empty; pass at least BOS");
  if (prefix.size() > model.dims().max_tgt_len) throw ConfigError("target prefix exceeds max_tgt_len");
  Matrix y0 = embed(model, prefix);
  Matrix c = layer_norm_forward(model.layer_norm("decoder.ln_self"), y0, cache ? &cache->ln_self : nullptr);
  Matrix y1 = y0 + attention_forward(model, adapters, names::kDecSelf, c, c, true,
                                     cache ? &cache->self_attn : nullptr);
  Matrix d = layer_norm_forward(model.layer_norm("decoder.ln_cross"), y1, cache ? &cache->ln_cross : nullptr);
  Matrix y2 = y1 + attention_forward(model, adapters, names::kDecCross, d, enc, false,
                                     cache ? &cache->cross_attn : nullptr);
  Matrix f = layer_norm_forward(model.layer_norm("decoder.ln_ffn"), y2, cache ? &cache->ln_ffn : nullptr);
  Matrix y3 = y2 + ffn_forward(model, adapters, names::kDecFfn, f, cache ? &cache->ffn : nullptr);
  Matrix z = layer_norm_forward(model.layer_norm("decoder.ln_final"), y3, cache ? &cache->ln_final : nullptr);
  return linear_forward(model, adapters, std::string(names::kOutput), z, cache ? &cache->out : nullptr);
}

// Returns d loss / d encoder states.
Matrix decoder_backward(const SeqModel& model, const AdapterSet& adapters, const DecoderCache& c,
                        const Matrix& dlogits, Gradients& grads) {
  Matrix dz = linear_backward(model, adapters, std::string(names::kOutput), c.out, dlogits, grads);
  Matrix dy3 = layer_norm_backward(model.layer_norm("decoder.ln_final"), c.ln_final, dz);
  Matrix df = ffn_backward(model, adapters, names::kDecFfn, c.ffn, dy3, grads);
  Matrix dy2 = dy3 + layer_norm_backward(model.layer_norm("decoder.ln_ffn"), c.ln_ffn, df);
  AttentionGrads cross = attention_backward(model, adapters, names::kDecCross, c.cross_attn, dy2, grads);
  Matrix dy1 = dy2 + layer_norm_backward(model.layer_norm("decoder.ln_cross"), c.ln_cross, cross.dxq);
  attention_backward(model, adapters, names::kDecSelf, c.self_attn, dy1, grads);
  return std::move(cross.dxkv);
}

}  // namespace

// ---------------------------------------------------------------------------

SeqModel SeqModel::init(const ModelDims& dims, Rng& rng, const InitOptions& options) {
  if (dims.vocab_size == 0 || dims.d_model == 0 || dims.d_ff == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  const std::size_t d = dims.d_model;
  const std::size_t v = dims.vocab_size;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::map<std::string, Matrix> dense;
  Matrix embedding = gaussian(v, d, 1.0, rng);
  dense[std::string(names::kOutput)] = embedding * inv_sqrt_d;
  dense[std::string(names::kEmbedding)] = std::move(embedding);
  for (std::string_view block : {names::kEncSelf, names::kDecSelf, names::kDecCross}) {
    dense[join_name(block, "q")] = gaussian(d, d, inv_sqrt_d, rng);
    dense[join_name(block, "k")] = gaussian(d, d, inv_sqrt_d, rng);
    dense[join_name(block, "v")] = Matrix::Identity(d, d) + gaussian(d, d, 0.02, rng);
    dense[join_name(block, "o")] = Matrix::Identity(d, d) + gaussian(d, d, 0.02, rng);
  }
  for (std::string_view block : {names::kEncFfn, names::kDecFfn}) {
    dense[join_name(block, "in")] = gaussian(dims.d_ff, d, 0.5 * inv_sqrt_d, rng);
    dense[join_name(block, "out")] =
        gaussian(d, dims.d_ff, 0.5 / std::sqrt(static_cast<double>(dims.d_ff)), rng);
  }

  std::map<std::string, FrozenLinear> linears;
  for (auto& [name, w] : dense) {
    linears[name] = options.quantize
                        ? FrozenLinear::from_quantized(QuantizedMatrix::quantize(w, options.block_size))
                        : FrozenLinear::from_dense(std::move(w));
  }
  std::map<std::string, LayerNormParams> lns;
  for (const char* name : {"encoder.ln_attn", "encoder.ln_ffn", "encoder.ln_final", "decoder.ln_self",
                           "decoder.ln_cross", "decoder.ln_ffn", "decoder.ln_final"}) {
    lns[name] = {Vector::Ones(static_cast<Eigen::Index>(d)), Vector::Zero(static_cast<Eigen::Index>(d))};
  }
  return from_parts(dims, std::move(linears), std::move(lns));
}

SeqModel SeqModel::from_parts(const ModelDims& dims, std::map<std::string, FrozenLinear> linears,
                              std::map<std::string, LayerNormParams> layer_norms) {
  SeqModel m;
  m.dims_ = dims;
  m.linears_ = std::move(linears);
  m.layer_norms_ = std::move(layer_norms);
  const auto d = static_cast<std::size_t>(dims.d_model);
  auto expect = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = m.linears_.find(name);
    if (it == m.linears_.end()) throw SchemaError("model is missing weight '" + name + "'");
    if (it->second.out_dim() != rows || it->second.in_dim() != cols) {
      throw DimensionError("weight '" + name + "' has the wrong shape");
    }
  };
  expect(std::string(names::kEmbedding), dims.vocab_size, d);
  expect(std::string(names::kOutput), dims.vocab_size, d);
  for (const auto& t : attention_targets()) expect(t, d, d);
  for (std::string_view block : {names::kEncFfn, names::kDecFfn}) {
    expect(join_name(block, "in"), dims.d_ff, d);
    expect(join_name(block, "out"), d, dims.d_ff);
  }
  for (const auto& [name, p] : m.layer_norms_) {
    if (static_cast<std::size_t>(p.gain.size()) != d || static_cast<std::size_t>(p.bias.size()) != d) {
      throw DimensionError("layer norm '" + name + "' has the wrong width");
    }
  }
  return m;
}

const FrozenLinear& SeqModel::linear(std::string_view name) const {
  auto it = linears_.find(std::string(name));
  if (it == linears_.end()) throw SchemaError("unknown weight '" + std::string(name) + "'");
  return it->second;
}

const LayerNormParams& SeqModel::layer_norm(std::string_view name) const {
  auto it = layer_norms_.find(std::string(name));
  if (it == layer_norms_.end()) throw SchemaError("unknown layer norm '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> SeqModel::attention_targets() {
  std::vector<std::string> out;
  for (std::string_view block : {names::kEncSelf, names::kDecSelf, names::kDecCross}) {
    for (const char* leaf : {"q", "k", "v", "o"}) out.push_back(join_name(block, leaf));
  }
  return out;
}

std::vector<std::string> SeqModel::default_adapter_targets() {
  auto out = attention_targets();
  out.emplace_back(names::kOutput);
  return out;
}

AdapterSet init_adapters(const SeqModel& model, std::span<const std::string> targets,
                         std::size_t rank, Rng& rng) {
  AdapterSet set;
  for (const auto& t : targets) {
    if (t == names::kEmbedding) throw ConfigError("the embedding table cannot carry an adapter");
    const FrozenLinear& w = model.linear(t);
    set.emplace(t, init_lora(t, w.out_dim(), w.in_dim(), rank, rng));
  }
  return set;
}

Matrix sinusoidal_positions(std::size_t length, std::size_t d_model) {
  Matrix pe(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(d_model));
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) / rate;
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) =
          i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

EncodedSource encode_source(const SeqModel& model, const AdapterSet& adapters,
                            std::span<const TokenId> src) {
  return {run_encoder(model, adapters, src, nullptr)};
}

Matrix decoder_logits(const SeqModel& model, const AdapterSet& adapters,
                      const EncodedSource& encoded, std::span<const TokenId> prefix) {
  return run_decoder(model, adapters, encoded.states, prefix, nullptr);
}

Matrix forward(const SeqModel& model, const AdapterSet& adapters, std::span<const TokenId> src,
               std::span<const TokenId> tgt_prefix) {
  return decoder_logits(model, adapters, encode_source(model, adapters, src), tgt_prefix);
}

struct TeacherForcedPass::State {
  const SeqModel* model;
  const AdapterSet* adapters;
  TokenSequence target;
  EncoderCache enc;
  DecoderCache dec;
  Matrix logits;
};

TeacherForcedPass::TeacherForcedPass(const SeqModel& model, const AdapterSet& adapters,
                                     std::span<const TokenId> src, std::span<const TokenId> tgt)
    : state_(std::make_unique<State>()) {
  if (tgt.empty()) throw ConfigError("target sequence is empty");
  state_->model = &model;
  state_->adapters = &adapters;
  state_->target.assign(tgt.begin(), tgt.end());
  TokenSequence prefix;
  prefix.reserve(tgt.size());
  prefix.push_back(tok::kBos);
  prefix.insert(prefix.end(), tgt.begin(), tgt.end() - 1);
  Matrix enc = run_encoder(model, adapters, src, &state_->enc);
  state_->logits = run_decoder(model, adapters, enc, prefix, &state_->dec);
}

TeacherForcedPass::~TeacherForcedPass() = default;
TeacherForcedPass::TeacherForcedPass(TeacherForcedPass&&) noexcept = default;

const Matrix& TeacherForcedPass::logits() const { return state_->logits; }
const TokenSequence& TeacherForcedPass::target() const { return state_->target; }

double TeacherForcedPass::cross_entropy() const {
  return loss::cross_entropy(state_->logits, state_->target);
}

void TeacherForcedPass::backward(double loss_scale, Gradients& grads) const {
  const SeqModel& model = *state_->model;
  const AdapterSet& adapters = *state_->adapters;
  Matrix dlogits = loss_scale * loss::cross_entropy_grad(state_->logits, state_->target);
  Matrix denc = decoder_backward(model, adapters, state_->dec, dlogits, grads);
  encoder_backward(model, adapters, state_->enc, denc, grads);
}

Gradients backward(const SeqModel& model, const AdapterSet& adapters, std::span<const TokenId> src,
                   std::span<const TokenId> tgt, double loss_scale) {
  Gradients grads;
  for (const auto& [name, ad] : adapters) {
    grads[name] = {Matrix::Zero(ad.a.rows(), ad.a.cols()), Matrix::Zero(ad.b.rows(), ad.b.cols())};
  }
  TeacherForcedPass(model, adapters, src, tgt).backward(loss_scale, grads);
  return grads;
}

}  // namespace reasongr::model
