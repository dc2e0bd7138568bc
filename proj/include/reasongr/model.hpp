#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reasongr/lora.hpp"
#include "reasongr/types.hpp"

namespace reasongr::model {

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t max_src_len = 160;
  std::size_t max_tgt_len = 48;

  bool operator==(const ModelDims&) const = default;
};

struct InitOptions {
  bool quantize = true;
  std::size_t block_size = 64;
};

struct LayerNormParams {
  Vector gain;
  Vector bias;
};

// Names of the frozen matrices. Every linear map is stored out x in.
namespace names {
inline constexpr std::string_view kEmbedding = "embedding";  // |V| x d, row lookup
inline constexpr std::string_view kOutput = "output";        // |V| x d
inline constexpr std::string_view kEncSelf = "encoder.self_attn";
inline constexpr std::string_view kDecSelf = "decoder.self_attn";
inline constexpr std::string_view kDecCross = "decoder.cross_attn";
inline constexpr std::string_view kEncFfn = "encoder.ffn";
inline constexpr std::string_view kDecFfn = "decoder.ffn";
}  // namespace names

using AdapterSet = std::map<std::string, LoraAdapter>;

struct LoraGrad {
  Matrix a;
  Matrix b;
};
using Gradients = std::map<std::string, LoraGrad>;

// One-layer, one-head pre-layer-norm encoder-decoder. All base weights are
// frozen after init(); only LoRA adapters train.
class SeqModel {
 public:
  // Base weights are drawn from `rng`. Attention value/output projections
  // start near the identity and the output projection starts as the scaled
  // embedding table, so the untrained backbone already carries token identity
  // from source to logits; adapters then only have to learn where to look.
  static SeqModel init(const ModelDims& dims, Rng& rng, const InitOptions& options = {});

  static SeqModel from_parts(const ModelDims& dims, std::map<std::string, FrozenLinear> linears,
                             std::map<std::string, LayerNormParams> layer_norms);

  const ModelDims& dims() const { return dims_; }
  const FrozenLinear& linear(std::string_view name) const;
  const std::map<std::string, FrozenLinear>& linears() const { return linears_; }
  const LayerNormParams& layer_norm(std::string_view name) const;
  const std::map<std::string, LayerNormParams>& layer_norms() const { return layer_norms_; }

  // The twelve attention projections (q, k, v, o of the three attention blocks).
  static std::vector<std::string> attention_targets();
  // Attention projections plus the output projection.
  static std::vector<std::string> default_adapter_targets();

 private:
  ModelDims dims_;
  std::map<std::string, FrozenLinear> linears_;
  std::map<std::string, LayerNormParams> layer_norms_;
};

AdapterSet init_adapters(const SeqModel& model, std::span<const std::string> targets,
                         std::size_t rank, Rng& rng);

Matrix sinusoidal_positions(std::size_t length, std::size_t d_model);

// Encoder states for a source sequence, reusable across decoder calls.
struct EncodedSource {
  Matrix states;  // src_len x d_model
};

EncodedSource encode_source(const SeqModel& model, const AdapterSet& adapters,
                            std::span<const TokenId> src);

// Logits (len(prefix) x |V|); row p conditions on src and prefix[0..p].
Matrix decoder_logits(const SeqModel& model, const AdapterSet& adapters,
                      const EncodedSource& encoded, std::span<const TokenId> prefix);

Matrix forward(const SeqModel& model, const AdapterSet& adapters, std::span<const TokenId> src,
               std::span<const TokenId> tgt_prefix);

// Teacher-forced pass over a full target. The decoder input is
// [BOS, tgt[0], ..., tgt[T-2]] and row p of logits() predicts tgt[p].
class TeacherForcedPass {
 public:
  TeacherForcedPass(const SeqModel& model, const AdapterSet& adapters,
                    std::span<const TokenId> src, std::span<const TokenId> tgt);
  ~TeacherForcedPass();
  TeacherForcedPass(TeacherForcedPass&&) noexcept;
  TeacherForcedPass& operator=(TeacherForcedPass&&) = delete;

  const Matrix& logits() const;
  const TokenSequence& target() const;
  double cross_entropy() const;

  // Adds gradients of loss_scale * token-averaged cross-entropy into `grads`
  // (entries are created on first use).
  void backward(double loss_scale, Gradients& grads) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

Gradients backward(const SeqModel& model, const AdapterSet& adapters, std::span<const TokenId> src,
                   std::span<const TokenId> tgt, double loss_scale);

}  // namespace reasongr::model
