#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "provdet/encoder.hpp"

namespace provdet {

inline constexpr double kDefaultMargin = 1.0;
inline constexpr double kDefaultLambda = 1.0;

// Euclidean distance. For unit vectors this equals sqrt(2 (1 - cos)).
double distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const float> a, std::span<const float> b);

// max(d_pos - d_neg + margin, 0)
double triplet_loss(double d_pos, double d_neg, double margin);

// ce + lambda * triplet; lambda = 0 trains without the contrastive term.
double combined_loss(double ce, double triplet, double lambda);

struct CrossEntropy {
  double loss = 0;
  std::array<double, 2> d_logits{};  // probs - one_hot(label)
};

CrossEntropy cross_entropy(double logit_human, double logit_llm, bool is_llm);

struct Example {
  std::vector<TokenId> ids;
  bool is_llm = false;
};

// For each sample, the index of a uniformly drawn opposite-class sample.
// Throws ValidationError unless both classes are present.
std::vector<std::size_t> assign_negatives(const std::vector<bool>& is_llm, std::uint64_t seed);

// Dropout seeds for the anchor and positive passes of sample i; never equal.
std::uint64_t anchor_seed(std::uint64_t batch_seed, std::size_t i);
std::uint64_t positive_seed(std::uint64_t batch_seed, std::size_t i);

struct Triplet {
  std::vector<double> anchor;
  std::vector<double> positive;
  std::vector<double> negative;
  double margin = kDefaultMargin;
  std::size_t negative_index = 0;
};

// One triplet per sample: positive is a second dropout pass of the anchor,
// negative is the anchor embedding of the assigned opposite-class sample.
template <typename T>
std::vector<Triplet> make_triplets(const ModelParams<T>& params, std::span<const Example> batch,
                                   std::uint64_t seed, double margin = kDefaultMargin);

struct LossConfig {
  double lambda = kDefaultLambda;
  double margin = kDefaultMargin;
};

struct BatchLoss {
  double total = 0;
  double ce = 0;       // mean over the batch
  double triplet = 0;  // mean over the batch
};

// Mean cross-entropy on anchor logits plus lambda times the mean triplet loss.
// When `grads` is non-empty the exact gradient of `total` is accumulated into
// it; the hinge contributes nothing where it is inactive or exactly at the
// kink, and a zero distance contributes nothing to its own term.
template <typename T>
BatchLoss batch_loss(const ModelParams<T>& params, std::span<const Example> batch,
                     const LossConfig& config, std::uint64_t seed, std::span<T> grads = {});

}  // namespace provdet
