#include "provdet/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "provdet/rng.hpp"

namespace provdet {

namespace {

template <typename T>
double distance_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ValidationError("distance: dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

constexpr std::uint64_t kNegativeTag = 0x6e6567ULL;

}  // namespace

double distance(std::span<const double> a, std::span<const double> b) { return distance_impl(a, b); }
double distance(std::span<const float> a, std::span<const float> b) { return distance_impl(a, b); }

double triplet_loss(double d_pos, double d_neg, double margin) {
  return std::max(d_pos - d_neg + margin, 0.0);
}

double combined_loss(double ce, double triplet, double lambda) { return ce + lambda * triplet; }

CrossEntropy cross_entropy(double logit_human, double logit_llm, bool is_llm) {
  const double m = std::max(logit_human, logit_llm);
  const double lse = m + std::log(std::exp(logit_human - m) + std::exp(logit_llm - m));
  CrossEntropy r;
  r.loss = lse - (is_llm ? logit_llm : logit_human);
  const double p_h = std::exp(logit_human - lse);
  const double p_l = std::exp(logit_llm - lse);
  r.d_logits = {p_h - (is_llm ? 0.0 : 1.0), p_l - (is_llm ? 1.0 : 0.0)};
  return r;
}

std::vector<std::size_t> assign_negatives(const std::vector<bool>& is_llm, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < is_llm.size(); ++i) (is_llm[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw ValidationError("triplets need both classes in the batch");
  }
  Rng rng(derive_seed(seed, kNegativeTag));
  std::vector<std::size_t> out(is_llm.size());
  for (std::size_t i = 0; i < is_llm.size(); ++i) {
    const auto& pool = is_llm[i] ? neg : pos;
    out[i] = pool[static_cast<std::size_t>(rng.below(pool.size()))];
  }
  return out;
}

std::uint64_t anchor_seed(std::uint64_t batch_seed, std::size_t i) {
  return derive_seed(batch_seed, 2 * static_cast<std::uint64_t>(i));
}

std::uint64_t positive_seed(std::uint64_t batch_seed, std::size_t i) {
  const std::uint64_t s = derive_seed(batch_seed, 2 * static_cast<std::uint64_t>(i) + 1);
  return s == anchor_seed(batch_seed, i) ? s + 1 : s;
}

namespace {

std::vector<bool> labels_of(std::span<const Example> batch) {
  std::vector<bool> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].is_llm;
  return labels;
}

}  // namespace

template <typename T>
std::vector<Triplet> make_triplets(const ModelParams<T>& params, std::span<const Example> batch,
                                   std::uint64_t seed, double margin) {
  if (!(margin > 0)) throw ValidationError("make_triplets: margin must be positive");
  const auto negatives = assign_negatives(labels_of(batch), seed);
  std::vector<std::vector<double>> anchors(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = forward(params, batch[i].ids, ForwardMode::training(anchor_seed(seed, i)));
    anchors[i].assign(r.embedding.begin(), r.embedding.end());
  }
  std::vector<Triplet> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = forward(params, batch[i].ids, ForwardMode::training(positive_seed(seed, i)));
    out[i].anchor = anchors[i];
    out[i].positive.assign(r.embedding.begin(), r.embedding.end());
    out[i].negative = anchors[negatives[i]];
    out[i].margin = margin;
    out[i].negative_index = negatives[i];
  }
  return out;
}

template <typename T>
BatchLoss batch_loss(const ModelParams<T>& params, std::span<const Example> batch,
                     const LossConfig& config, std::uint64_t seed, std::span<T> grads) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  if (config.lambda < 0) throw ValidationError("batch_loss: lambda must be non-negative");
  if (!(config.margin > 0)) throw ValidationError("batch_loss: margin must be positive");
  const bool want_grads = !grads.empty();
  const bool contrast = config.lambda > 0;
  const std::size_t b = batch.size();
  const double inv_b = 1.0 / static_cast<double>(b);

  std::vector<ForwardResult<T>> anchors;
  std::vector<ForwardResult<T>> positives;
  anchors.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    anchors.push_back(forward(params, batch[i].ids, ForwardMode::training(anchor_seed(seed, i))));
  }

  BatchLoss out;
  const std::size_t pdim = params.config.projector_dim;
  std::vector<std::vector<double>> d_anchor(b, std::vector<double>(pdim, 0.0));
  std::vector<std::vector<double>> d_positive;
  std::vector<std::array<double, 2>> d_logits(b);

  for (std::size_t i = 0; i < b; ++i) {
    const auto ce = cross_entropy(anchors[i].logits[0], anchors[i].logits[1], batch[i].is_llm);
    out.ce += ce.loss * inv_b;
    d_logits[i] = {ce.d_logits[0] * inv_b, ce.d_logits[1] * inv_b};
  }

  if (contrast) {
    const auto negatives = assign_negatives(labels_of(batch), seed);
    positives.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
      positives.push_back(
          forward(params, batch[i].ids, ForwardMode::training(positive_seed(seed, i))));
    }
    d_positive.assign(b, std::vector<double>(pdim, 0.0));
    const double g = config.lambda * inv_b;
    for (std::size_t i = 0; i < b; ++i) {
      const auto& a = anchors[i].embedding;
      const auto& p = positives[i].embedding;
      const auto& n = anchors[negatives[i]].embedding;
      const double d_pos = distance(std::span<const T>(a), std::span<const T>(p));
      const double d_neg = distance(std::span<const T>(a), std::span<const T>(n));
      const double hinge = d_pos - d_neg + config.margin;
      out.triplet += triplet_loss(d_pos, d_neg, config.margin) * inv_b;
      if (!want_grads || !(hinge > 0)) continue;
      auto& da = d_anchor[i];
      auto& dp = d_positive[i];
      auto& dn = d_anchor[negatives[i]];
      if (d_pos > 0) {
        for (std::size_t j = 0; j < pdim; ++j) {
          const double u = g * (static_cast<double>(a[j]) - static_cast<double>(p[j])) / d_pos;
          da[j] += u;
          dp[j] -= u;
        }
      }
      if (d_neg > 0) {
        for (std::size_t j = 0; j < pdim; ++j) {
          const double u = g * (static_cast<double>(a[j]) - static_cast<double>(n[j])) / d_neg;
          da[j] -= u;
          dn[j] += u;
        }
      }
    }
  }
  out.total = combined_loss(out.ce, out.triplet, config.lambda);

  if (want_grads) {
    std::vector<T> de(pdim);
    for (std::size_t i = 0; i < b; ++i) {
      std::copy(d_anchor[i].begin(), d_anchor[i].end(), de.begin());
      const std::array<T, 2> dl{static_cast<T>(d_logits[i][0]), static_cast<T>(d_logits[i][1])};
      backward(anchors[i].tape, std::span<const T>(de), std::span<const T>(dl), grads);
    }
    if (contrast) {
      for (std::size_t i = 0; i < b; ++i) {
        std::copy(d_positive[i].begin(), d_positive[i].end(), de.begin());
        backward(positives[i].tape, std::span<const T>(de), std::span<const T>(), grads);
      }
    }
  }
  return out;
}

template std::vector<Triplet> make_triplets<float>(const ModelParams<float>&, std::span<const Example>, std::uint64_t, double);
template std::vector<Triplet> make_triplets<double>(const ModelParams<double>&, std::span<const Example>, std::uint64_t, double);
template BatchLoss batch_loss<float>(const ModelParams<float>&, std::span<const Example>, const LossConfig&, std::uint64_t, std::span<float>);
template BatchLoss batch_loss<double>(const ModelParams<double>&, std::span<const Example>, const LossConfig&, std::uint64_t, std::span<double>);

}  // namespace provdet
