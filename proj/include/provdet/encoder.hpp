#pragma once

// Pre-norm transformer encoder with projector and two-logit classifier.
//
//   x0      = tok_emb[id] + pos_emb[position]           (non-PAD positions only)
//   layer:  x += dropout(attn(LN1(x)));  x += dropout(W2 gelu(W1 LN2(x)))
//   pooled  = dropout(mean_i LNf(x)_i)
//   E       = normalize(Wp2 tanh(Wp1 pooled + bp1) + bp2)
//   logits  = Wc c + bc,   c = E (projected) or pooled
//
// Matrices are row-major [in, out]. All parameters live in one flat buffer
// described by ParamLayout, which Adam, checkpoints and the gradient check
// share.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provdet/vocab.hpp"

namespace provdet {

enum class ClassifierInput { Pooled, Projected };

std::string_view to_string(ClassifierInput input);
std::optional<ClassifierInput> parse_classifier_input(std::string_view s);

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ff_dim = 512;
  std::size_t max_len = 256;
  double dropout_p = 0.1;
  std::size_t projector_dim = 128;
  ClassifierInput classifier_input = ClassifierInput::Projected;

  // Throws ValidationError on an inconsistent configuration.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const noexcept { return rows * cols; }
};

struct LayerOffsets {
  std::size_t ln1_gamma, ln1_beta;
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t ln2_gamma, ln2_beta;
  std::size_t w1, b1, w2, b2;
};

struct ParamOffsets {
  std::size_t tok_emb, pos_emb;
  std::vector<LayerOffsets> layers;
  std::size_t lnf_gamma, lnf_beta;
  std::size_t proj_w1, proj_b1, proj_w2, proj_b2;
  std::size_t cls_w, cls_b;
};

class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const EncoderConfig& config);

  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  std::size_t total_size() const noexcept { return total_; }
  const ParamOffsets& offsets() const noexcept { return offsets_; }

  // Throws ValidationError for unknown names.
  const ParamBlock& block(std::string_view name) const;
  const ParamBlock& block_containing(std::size_t index) const;

 private:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
  ParamOffsets offsets_{};
};

template <typename T>
struct ModelParams {
  EncoderConfig config;
  ParamLayout layout;
  std::vector<T> values;

  std::span<T> block(std::string_view name) {
    const auto& b = layout.block(name);
    return std::span<T>(values).subspan(b.offset, b.size());
  }
  std::span<const T> block(std::string_view name) const {
    const auto& b = layout.block(name);
    return std::span<const T>(values).subspan(b.offset, b.size());
  }
};

// Embeddings ~ N(0, 0.1^2); weight matrices ~ N(0, 1/fan_in), with the two
// residual output projections further scaled by 1/sqrt(2 * num_layers);
// biases 0; layer-norm gains 1.
template <typename T>
ModelParams<T> init_params(const EncoderConfig& config, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> convert_params(const ModelParams<From>& p) {
  ModelParams<To> out{p.config, p.layout, {}};
  out.values.assign(p.values.begin(), p.values.end());
  return out;
}

struct ForwardMode {
  bool train = false;
  std::uint64_t dropout_seed = 0;

  static ForwardMode eval() noexcept { return {}; }
  static ForwardMode training(std::uint64_t seed) noexcept { return {true, seed}; }
};

namespace detail {
template <typename T>
struct TapeData;
template <typename T>
struct EncoderImpl;
}  // namespace detail

// Activations recorded by a train-mode forward pass. Move-only; consumed by
// exactly one backward call. Refers to the parameters it was built from,
// which must outlive it.
template <typename T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recorded() const noexcept { return data_ != nullptr; }
  bool consumed() const noexcept { return consumed_; }

 private:
  friend struct detail::EncoderImpl<T>;
  std::unique_ptr<detail::TapeData<T>> data_;
  bool consumed_ = false;
};

template <typename T>
struct ForwardResult {
  std::vector<T> pooled;     // embed_dim, after pooled dropout
  std::vector<T> embedding;  // projector_dim, unit L2 norm
  std::array<T, 2> logits{};
  // {human, llm}, computed in double. prob_llm >= 0.5 exactly when
  // logit_llm >= logit_human (ties go to llm).
  std::array<double, 2> probs{};
  Tape<T> tape;  // recorded in train mode only

  double prob_llm() const noexcept { return probs[1]; }
};

// `ids` must start with kEncId and hold at most max_len entries; shorter
// inputs behave as if right-padded with PAD. PAD positions take no part in
// attention or pooling. Throws ValidationError for out-of-range ids or
// non-finite activations.
template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, std::span<const TokenId> ids,
                         ForwardMode mode);

// Accumulates d(loss)/d(params) into `grads` (length layout.total_size())
// given the upstream gradients for the embedding and the logits; an empty
// span counts as zero. Throws ValidationError if the tape was not recorded
// or was already consumed.
template <typename T>
void backward(Tape<T>& tape, std::span<const T> d_embedding, std::span<const T> d_logits,
              std::span<T> grads);

// Logits -> (human, llm) probabilities with the tie rule above.
std::array<double, 2> two_class_softmax(double logit_human, double logit_llm);

}  // namespace provdet
