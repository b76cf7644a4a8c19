#include "provdet/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "provdet/kernels.hpp"
#include "provdet/rng.hpp"

namespace provdet {

std::string_view to_string(ClassifierInput input) {
  return input == ClassifierInput::Pooled ? "pooled" : "projected";
}

std::optional<ClassifierInput> parse_classifier_input(std::string_view s) {
  if (s == "pooled") return ClassifierInput::Pooled;
  if (s == "projected") return ClassifierInput::Projected;
  return std::nullopt;
}

void EncoderConfig::validate() const {
  if (vocab_size <= kNumSpecials) throw ValidationError("encoder: vocab_size must exceed 3");
  if (embed_dim == 0 || num_heads == 0) throw ValidationError("encoder: embed_dim and num_heads must be positive");
  if (embed_dim % num_heads != 0) throw ValidationError("encoder: embed_dim must be divisible by num_heads");
  if (ff_dim == 0 || projector_dim == 0) throw ValidationError("encoder: ff_dim and projector_dim must be positive");
  if (max_len < 2) throw ValidationError("encoder: max_len must be at least 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ValidationError("encoder: dropout_p must lie in [0, 1)");
}

// ---- Layout ----------------------------------------------------------------------

std::size_t ParamLayout::add(std::string name, std::size_t rows, std::size_t cols) {
  const std::size_t offset = total_;
  blocks_.push_back({std::move(name), rows, cols, offset});
  total_ += rows * cols;
  return offset;
}

ParamLayout::ParamLayout(const EncoderConfig& c) {
  c.validate();
  const std::size_t d = c.embed_dim;
  offsets_.tok_emb = add("tok_emb", c.vocab_size, d);
  offsets_.pos_emb = add("pos_emb", c.max_len, d);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerOffsets o{};
    o.ln1_gamma = add(p + "ln1.gamma", 1, d);
    o.ln1_beta = add(p + "ln1.beta", 1, d);
    o.wq = add(p + "attn.wq", d, d);
    o.bq = add(p + "attn.bq", 1, d);
    o.wk = add(p + "attn.wk", d, d);
    o.bk = add(p + "attn.bk", 1, d);
    o.wv = add(p + "attn.wv", d, d);
    o.bv = add(p + "attn.bv", 1, d);
    o.wo = add(p + "attn.wo", d, d);
    o.bo = add(p + "attn.bo", 1, d);
    o.ln2_gamma = add(p + "ln2.gamma", 1, d);
    o.ln2_beta = add(p + "ln2.beta", 1, d);
    o.w1 = add(p + "ffn.w1", d, c.ff_dim);
    o.b1 = add(p + "ffn.b1", 1, c.ff_dim);
    o.w2 = add(p + "ffn.w2", c.ff_dim, d);
    o.b2 = add(p + "ffn.b2", 1, d);
    offsets_.layers.push_back(o);
  }
  offsets_.lnf_gamma = add("final_ln.gamma", 1, d);
  offsets_.lnf_beta = add("final_ln.beta", 1, d);
  offsets_.proj_w1 = add("proj.w1", d, d);
  offsets_.proj_b1 = add("proj.b1", 1, d);
  offsets_.proj_w2 = add("proj.w2", d, c.projector_dim);
  offsets_.proj_b2 = add("proj.b2", 1, c.projector_dim);
  const std::size_t cls_in = c.classifier_input == ClassifierInput::Pooled ? d : c.projector_dim;
  offsets_.cls_w = add("cls.w", cls_in, 2);
  offsets_.cls_b = add("cls.b", 1, 2);
}

const ParamBlock& ParamLayout::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ValidationError("unknown parameter block \"" + std::string(name) + "\"");
}

const ParamBlock& ParamLayout::block_containing(std::size_t index) const {
  const auto it = std::upper_bound(blocks_.begin(), blocks_.end(), index,
                                   [](std::size_t i, const ParamBlock& b) { return i < b.offset; });
  if (it == blocks_.begin() || index >= total_) throw ValidationError("parameter index out of range");
  return *std::prev(it);
}

template <typename T>
ModelParams<T> init_params(const EncoderConfig& config, std::uint64_t seed) {
  ModelParams<T> p{config, ParamLayout(config), {}};
  p.values.assign(p.layout.total_size(), T(0));
  Rng rng(seed);
  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(1, config.num_layers)));
  for (const auto& b : p.layout.blocks()) {
    const std::string_view name = b.name;
    const auto ends_with = [&](std::string_view s) {
      return name.size() >= s.size() && name.substr(name.size() - s.size()) == s;
    };
    double stddev = 0;
    double fill = 0;
    if (name == "tok_emb" || name == "pos_emb") {
      stddev = 0.1;
    } else if (ends_with("gamma")) {
      fill = 1;
    } else if (b.rows > 1) {
      stddev = 1.0 / std::sqrt(static_cast<double>(b.rows));
      if (ends_with("attn.wo") || ends_with("ffn.w2")) stddev *= residual_scale;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      p.values[b.offset + i] = static_cast<T>(stddev > 0 ? stddev * rng.normal() : fill);
    }
  }
  return p;
}

std::array<double, 2> two_class_softmax(double logit_human, double logit_llm) {
  const double diff = logit_llm - logit_human;
  double p_llm;
  if (diff >= 0) {
    p_llm = 1.0 / (1.0 + std::exp(-diff));
  } else {
    const double e = std::exp(diff);
    p_llm = e / (1.0 + e);
    // exp rounds to 1 for |diff| below ~1e-16, which would yield exactly 0.5.
    if (p_llm >= 0.5) p_llm = std::nextafter(0.5, 0.0);
  }
  return {1.0 - p_llm, p_llm};
}

// ---- Tape ------------------------------------------------------------------------

namespace detail {

template <typename T>
struct LayerTape {
  std::vector<T> xhat1, rstd1, h1, q, k, v, attn, ctx, mask_a;
  std::vector<T> xhat2, rstd2, h2, f, g, mask_f;
};

template <typename T>
struct TapeData {
  const ModelParams<T>* params = nullptr;
  std::size_t n = 0;
  std::vector<TokenId> tokens;
  std::vector<std::size_t> positions;
  std::vector<LayerTape<T>> layers;
  std::vector<T> xhatf, rstdf, mask_p, pooled, t1, embedding;
  T z2_norm = 0;
};

}  // namespace detail

template <typename T>
Tape<T>::Tape() = default;
template <typename T>
Tape<T>::~Tape() = default;
template <typename T>
Tape<T>::Tape(Tape&&) noexcept = default;
template <typename T>
Tape<T>& Tape<T>::operator=(Tape&&) noexcept = default;

// ---- Kernels ---------------------------------------------------------------------

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
constexpr std::uint64_t kPooledDropoutTag = 0x706f6f6c6564ULL;

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  kernels::axpy(alpha, std::span<const T>(x, n), std::span<T>(y, n));
}

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  return kernels::dot(std::span<const T>(a, n), std::span<const T>(b, n));
}

// Y[n, out] = X[n, in] W[in, out] + b
template <typename T>
void linear(const T* x, std::size_t n, std::size_t in, const T* w, const T* b, std::size_t out,
            T* y) {
  for (std::size_t t = 0; t < n; ++t) {
    T* yr = y + t * out;
    std::copy(b, b + out, yr);
    const T* xr = x + t * in;
    for (std::size_t k = 0; k < in; ++k) {
      if (xr[k] != T(0)) axpy(xr[k], w + k * out, yr, out);
    }
  }
}

// dW += X^T dY, db += sum_t dY, dX (+)= dY W^T. dx may be null.
template <typename T>
void linear_backward(const T* x, std::size_t n, std::size_t in, const T* w, std::size_t out,
                     const T* dy, T* dw, T* db, T* dx) {
  for (std::size_t t = 0; t < n; ++t) {
    const T* dyr = dy + t * out;
    const T* xr = x + t * in;
    axpy(T(1), dyr, db, out);
    for (std::size_t k = 0; k < in; ++k) {
      if (xr[k] != T(0)) axpy(xr[k], dyr, dw + k * out, out);
    }
    if (dx != nullptr) {
      T* dxr = dx + t * in;
      for (std::size_t k = 0; k < in; ++k) dxr[k] += dot(dyr, w + k * out, out);
    }
  }
}

template <typename T>
void layer_norm(const T* x, std::size_t n, std::size_t d, const T* gamma, const T* beta, T* y,
                T* xhat, T* rstd) {
  for (std::size_t t = 0; t < n; ++t) {
    const T* xr = x + t * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(d);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    rstd[t] = r;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mean) * r;
      xhat[t * d + j] = h;
      y[t * d + j] = gamma[j] * h + beta[j];
    }
  }
}

// Accumulates into dx, dgamma, dbeta.
template <typename T>
void layer_norm_backward(const T* dy, const T* xhat, const T* rstd, std::size_t n, std::size_t d,
                         const T* gamma, T* dx, T* dgamma, T* dbeta) {
  std::vector<T> dxhat(d);
  for (std::size_t t = 0; t < n; ++t) {
    const T* dyr = dy + t * d;
    const T* xh = xhat + t * d;
    T mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dgamma[j] += dyr[j] * xh[j];
      dbeta[j] += dyr[j];
      dxhat[j] = dyr[j] * gamma[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xh[j];
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx[t * d + j] += rstd[t] * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
    }
  }
}

template <typename T>
inline T gelu(T f) {
  const T u = static_cast<T>(kGeluC) * (f + static_cast<T>(kGeluA) * f * f * f);
  return T(0.5) * f * (T(1) + std::tanh(u));
}

template <typename T>
inline T gelu_grad(T f) {
  const T u = static_cast<T>(kGeluC) * (f + static_cast<T>(kGeluA) * f * f * f);
  const T th = std::tanh(u);
  const T du = static_cast<T>(kGeluC) * (T(1) + T(3) * static_cast<T>(kGeluA) * f * f);
  return T(0.5) * (T(1) + th) + T(0.5) * f * (T(1) - th * th) * du;
}

// Inverted-dropout scale factors (0 or 1/(1-p)) for `count` units. Each
// unit's draw depends only on (seed, site, index).
template <typename T>
std::vector<T> dropout_mask(std::uint64_t seed, std::uint64_t site, std::size_t count, double p) {
  std::vector<T> mask(count);
  const std::uint64_t key = derive_seed(seed, site);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < count; ++i) {
    const double u = static_cast<double>(splitmix64(key + i) >> 11) * 0x1.0p-53;
    mask[i] = u < p ? T(0) : keep;
  }
  return mask;
}

template <typename T>
void apply_mask(std::vector<T>& x, const std::vector<T>& mask) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

}  // namespace

// ---- Forward / backward ------------------------------------------------------------

namespace detail {

template <typename T>
struct EncoderImpl {
  static ForwardResult<T> forward(const ModelParams<T>& params, std::span<const TokenId> ids,
                                  ForwardMode mode) {
    const EncoderConfig& c = params.config;
    const ParamOffsets& off = params.layout.offsets();
    const T* P = params.values.data();
    const std::size_t d = c.embed_dim;
    const std::size_t H = c.num_heads;
    const std::size_t dh = d / H;
    const std::size_t ff = c.ff_dim;
    const bool dropout = mode.train && c.dropout_p > 0.0;

    if (params.values.size() != params.layout.total_size()) {
      throw ValidationError("forward: parameter buffer does not match layout");
    }
    if (ids.empty() || ids.size() > c.max_len) {
      throw ValidationError("forward: input length must be in [1, max_len]");
    }
    if (ids[0] != kEncId) throw ValidationError("forward: position 0 must hold the [ENC] id");

    auto tape = std::make_unique<TapeData<T>>();
    tape->params = &params;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c.vocab_size) {
        throw ValidationError("forward: token id " + std::to_string(ids[i]) + " out of range");
      }
      if (ids[i] == kPadId) continue;
      tape->tokens.push_back(ids[i]);
      tape->positions.push_back(i);
    }
    const std::size_t n = tape->tokens.size();
    tape->n = n;

    std::vector<T> x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      const T* te = P + off.tok_emb + static_cast<std::size_t>(tape->tokens[i]) * d;
      const T* pe = P + off.pos_emb + tape->positions[i] * d;
      for (std::size_t j = 0; j < d; ++j) x[i * d + j] = te[j] + pe[j];
    }

    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      const LayerOffsets& o = off.layers[l];
      LayerTape<T> lt;
      lt.xhat1.resize(n * d);
      lt.rstd1.resize(n);
      lt.h1.resize(n * d);
      layer_norm(x.data(), n, d, P + o.ln1_gamma, P + o.ln1_beta, lt.h1.data(), lt.xhat1.data(),
                 lt.rstd1.data());
      lt.q.resize(n * d);
      lt.k.resize(n * d);
      lt.v.resize(n * d);
      linear(lt.h1.data(), n, d, P + o.wq, P + o.bq, d, lt.q.data());
      linear(lt.h1.data(), n, d, P + o.wk, P + o.bk, d, lt.k.data());
      linear(lt.h1.data(), n, d, P + o.wv, P + o.bv, d, lt.v.data());

      lt.attn.assign(H * n * n, T(0));
      lt.ctx.assign(n * d, T(0));
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
          T* row = lt.attn.data() + (h * n + i) * n;
          const T* qi = lt.q.data() + i * d + h * dh;
          T mx = -std::numeric_limits<T>::infinity();
          for (std::size_t j = 0; j < n; ++j) {
            row[j] = dot(qi, lt.k.data() + j * d + h * dh, dh) * scale;
            mx = std::max(mx, row[j]);
          }
          T sum = 0;
          for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
          }
          T* ci = lt.ctx.data() + i * d + h * dh;
          for (std::size_t j = 0; j < n; ++j) {
            row[j] /= sum;
            axpy(row[j], lt.v.data() + j * d + h * dh, ci, dh);
          }
        }
      }
      std::vector<T> a(n * d);
      linear(lt.ctx.data(), n, d, P + o.wo, P + o.bo, d, a.data());
      if (dropout) {
        lt.mask_a = dropout_mask<T>(mode.dropout_seed, 4 * l, n * d, c.dropout_p);
        apply_mask(a, lt.mask_a);
      }
      for (std::size_t i = 0; i < n * d; ++i) x[i] += a[i];

      lt.xhat2.resize(n * d);
      lt.rstd2.resize(n);
      lt.h2.resize(n * d);
      layer_norm(x.data(), n, d, P + o.ln2_gamma, P + o.ln2_beta, lt.h2.data(), lt.xhat2.data(),
                 lt.rstd2.data());
      lt.f.resize(n * ff);
      lt.g.resize(n * ff);
      linear(lt.h2.data(), n, d, P + o.w1, P + o.b1, ff, lt.f.data());
      for (std::size_t i = 0; i < n * ff; ++i) lt.g[i] = gelu(lt.f[i]);
      std::vector<T> out(n * d);
      linear(lt.g.data(), n, ff, P + o.w2, P + o.b2, d, out.data());
      if (dropout) {
        lt.mask_f = dropout_mask<T>(mode.dropout_seed, 4 * l + 1, n * d, c.dropout_p);
        apply_mask(out, lt.mask_f);
      }
      for (std::size_t i = 0; i < n * d; ++i) x[i] += out[i];
      if (mode.train) tape->layers.push_back(std::move(lt));
    }

    std::vector<T> xf(n * d);
    tape->xhatf.resize(n * d);
    tape->rstdf.resize(n);
    layer_norm(x.data(), n, d, P + off.lnf_gamma, P + off.lnf_beta, xf.data(), tape->xhatf.data(),
               tape->rstdf.data());

    ForwardResult<T> r;
    r.pooled.assign(d, T(0));
    for (std::size_t i = 0; i < n; ++i) axpy(T(1), xf.data() + i * d, r.pooled.data(), d);
    for (auto& v : r.pooled) v /= static_cast<T>(n);
    if (dropout) {
      tape->mask_p = dropout_mask<T>(mode.dropout_seed, kPooledDropoutTag, d, c.dropout_p);
      apply_mask(r.pooled, tape->mask_p);
    }

    std::vector<T> t1(d);
    linear(r.pooled.data(), 1, d, P + off.proj_w1, P + off.proj_b1, d, t1.data());
    for (auto& v : t1) v = std::tanh(v);
    std::vector<T> z2(c.projector_dim);
    linear(t1.data(), 1, d, P + off.proj_w2, P + off.proj_b2, c.projector_dim, z2.data());
    const T norm = std::sqrt(dot(z2.data(), z2.data(), z2.size()));
    if (!(norm > T(0)) || !std::isfinite(norm)) {
      throw ValidationError("forward: projector output has zero or non-finite norm");
    }
    r.embedding.resize(z2.size());
    for (std::size_t j = 0; j < z2.size(); ++j) r.embedding[j] = z2[j] / norm;

    const std::vector<T>& cls_in =
        c.classifier_input == ClassifierInput::Pooled ? r.pooled : r.embedding;
    linear(cls_in.data(), 1, cls_in.size(), P + off.cls_w, P + off.cls_b, 2, r.logits.data());

    if (!all_finite<T>(r.embedding) || !all_finite<T>(r.logits) || !all_finite<T>(r.pooled)) {
      throw ValidationError("forward: non-finite activation");
    }
    r.probs = two_class_softmax(static_cast<double>(r.logits[0]), static_cast<double>(r.logits[1]));

    if (mode.train) {
      tape->pooled = r.pooled;
      tape->t1 = std::move(t1);
      tape->embedding = r.embedding;
      tape->z2_norm = norm;
      r.tape.data_ = std::move(tape);
    }
    return r;
  }

  static void backward(Tape<T>& tape, std::span<const T> d_embedding, std::span<const T> d_logits,
                       std::span<T> grads) {
    if (tape.consumed_) throw ValidationError("backward: tape already consumed");
    if (!tape.data_) throw ValidationError("backward: tape was not recorded (eval-mode forward)");
    const TapeData<T>& tp = *tape.data_;
    const ModelParams<T>& params = *tp.params;
    const EncoderConfig& c = params.config;
    const ParamOffsets& off = params.layout.offsets();
    const T* P = params.values.data();
    if (grads.size() != params.layout.total_size()) {
      throw ValidationError("backward: gradient buffer does not match layout");
    }
    if (!d_embedding.empty() && d_embedding.size() != c.projector_dim) {
      throw ValidationError("backward: embedding gradient has wrong size");
    }
    if (!d_logits.empty() && d_logits.size() != 2) {
      throw ValidationError("backward: logit gradient must have two entries");
    }
    tape.consumed_ = true;

    T* G = grads.data();
    const std::size_t d = c.embed_dim;
    const std::size_t H = c.num_heads;
    const std::size_t dh = d / H;
    const std::size_t ff = c.ff_dim;
    const std::size_t n = tp.n;
    const std::size_t pdim = c.projector_dim;

    std::vector<T> d_emb(pdim, T(0));
    if (!d_embedding.empty()) std::copy(d_embedding.begin(), d_embedding.end(), d_emb.begin());
    std::vector<T> d_pooled(d, T(0));

    if (!d_logits.empty()) {
      const bool pooled_in = c.classifier_input == ClassifierInput::Pooled;
      const std::vector<T>& cls_in = pooled_in ? tp.pooled : tp.embedding;
      std::vector<T>& d_in = pooled_in ? d_pooled : d_emb;
      linear_backward(cls_in.data(), 1, cls_in.size(), P + off.cls_w, 2, d_logits.data(),
                      G + off.cls_w, G + off.cls_b, d_in.data());
    }

    // E = z / |z|  =>  dz = (dE - E (E . dE)) / |z|
    const T e_dot = dot(tp.embedding.data(), d_emb.data(), pdim);
    std::vector<T> dz2(pdim);
    for (std::size_t j = 0; j < pdim; ++j) {
      dz2[j] = (d_emb[j] - tp.embedding[j] * e_dot) / tp.z2_norm;
    }
    std::vector<T> dt1(d, T(0));
    linear_backward(tp.t1.data(), 1, d, P + off.proj_w2, pdim, dz2.data(), G + off.proj_w2,
                    G + off.proj_b2, dt1.data());
    for (std::size_t j = 0; j < d; ++j) dt1[j] *= T(1) - tp.t1[j] * tp.t1[j];
    linear_backward(tp.pooled.data(), 1, d, P + off.proj_w1, d, dt1.data(), G + off.proj_w1,
                    G + off.proj_b1, d_pooled.data());

    if (!tp.mask_p.empty()) {
      for (std::size_t j = 0; j < d; ++j) d_pooled[j] *= tp.mask_p[j];
    }
    std::vector<T> dxf(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) dxf[i * d + j] = d_pooled[j] / static_cast<T>(n);
    }
    std::vector<T> dx(n * d, T(0));
    layer_norm_backward(dxf.data(), tp.xhatf.data(), tp.rstdf.data(), n, d, P + off.lnf_gamma,
                        dx.data(), G + off.lnf_gamma, G + off.lnf_beta);

    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    for (std::size_t l = c.num_layers; l-- > 0;) {
      const LayerOffsets& o = off.layers[l];
      const LayerTape<T>& lt = tp.layers[l];

      // Feed-forward sublayer: x_out = x_mid + mask_f * (W2 gelu(W1 h2 + b1) + b2)
      std::vector<T> d_out(dx);
      if (!lt.mask_f.empty()) apply_mask(d_out, lt.mask_f);
      std::vector<T> dg(n * ff, T(0));
      linear_backward(lt.g.data(), n, ff, P + o.w2, d, d_out.data(), G + o.w2, G + o.b2, dg.data());
      for (std::size_t i = 0; i < n * ff; ++i) dg[i] *= gelu_grad(lt.f[i]);
      std::vector<T> dh2(n * d, T(0));
      linear_backward(lt.h2.data(), n, d, P + o.w1, ff, dg.data(), G + o.w1, G + o.b1, dh2.data());
      layer_norm_backward(dh2.data(), lt.xhat2.data(), lt.rstd2.data(), n, d, P + o.ln2_gamma,
                          dx.data(), G + o.ln2_gamma, G + o.ln2_beta);

      // Attention sublayer: x_mid = x_in + mask_a * (Wo ctx + bo)
      std::vector<T> d_a(dx);
      if (!lt.mask_a.empty()) apply_mask(d_a, lt.mask_a);
      std::vector<T> dctx(n * d, T(0));
      linear_backward(lt.ctx.data(), n, d, P + o.wo, d, d_a.data(), G + o.wo, G + o.bo,
                      dctx.data());

      std::vector<T> dq(n * d, T(0)), dk(n * d, T(0)), dv(n * d, T(0));
      std::vector<T> ds(n);
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
          const T* row = lt.attn.data() + (h * n + i) * n;
          const T* dci = dctx.data() + i * d + h * dh;
          T weighted = 0;
          for (std::size_t j = 0; j < n; ++j) {
            ds[j] = dot(dci, lt.v.data() + j * d + h * dh, dh);
            weighted += ds[j] * row[j];
            axpy(row[j], dci, dv.data() + j * d + h * dh, dh);
          }
          const T* qi = lt.q.data() + i * d + h * dh;
          T* dqi = dq.data() + i * d + h * dh;
          for (std::size_t j = 0; j < n; ++j) {
            const T s = row[j] * (ds[j] - weighted) * scale;
            if (s == T(0)) continue;
            axpy(s, lt.k.data() + j * d + h * dh, dqi, dh);
            axpy(s, qi, dk.data() + j * d + h * dh, dh);
          }
        }
      }
      std::vector<T> dh1(n * d, T(0));
      linear_backward(lt.h1.data(), n, d, P + o.wq, d, dq.data(), G + o.wq, G + o.bq, dh1.data());
      linear_backward(lt.h1.data(), n, d, P + o.wk, d, dk.data(), G + o.wk, G + o.bk, dh1.data());
      linear_backward(lt.h1.data(), n, d, P + o.wv, d, dv.data(), G + o.wv, G + o.bv, dh1.data());
      layer_norm_backward(dh1.data(), lt.xhat1.data(), lt.rstd1.data(), n, d, P + o.ln1_gamma,
                          dx.data(), G + o.ln1_gamma, G + o.ln1_beta);
    }

    for (std::size_t i = 0; i < n; ++i) {
      const T* dxr = dx.data() + i * d;
      axpy(T(1), dxr, G + off.tok_emb + static_cast<std::size_t>(tp.tokens[i]) * d, d);
      axpy(T(1), dxr, G + off.pos_emb + tp.positions[i] * d, d);
    }
    tape.data_.reset();
  }
};

}  // namespace detail

template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, std::span<const TokenId> ids,
                         ForwardMode mode) {
  return detail::EncoderImpl<T>::forward(params, ids, mode);
}

template <typename T>
void backward(Tape<T>& tape, std::span<const T> d_embedding, std::span<const T> d_logits,
              std::span<T> grads) {
  detail::EncoderImpl<T>::backward(tape, d_embedding, d_logits, grads);
}

template class Tape<float>;
template class Tape<double>;
template ModelParams<float> init_params<float>(const EncoderConfig&, std::uint64_t);
template ModelParams<double> init_params<double>(const EncoderConfig&, std::uint64_t);
template ForwardResult<float> forward<float>(const ModelParams<float>&, std::span<const TokenId>, ForwardMode);
template ForwardResult<double> forward<double>(const ModelParams<double>&, std::span<const TokenId>, ForwardMode);
template void backward<float>(Tape<float>&, std::span<const float>, std::span<const float>, std::span<float>);
template void backward<double>(Tape<double>&, std::span<const double>, std::span<const double>, std::span<double>);

}  // namespace provdet
