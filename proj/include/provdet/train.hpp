#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provdet/checkpoint.hpp"
#include "provdet/contrastive.hpp"
#include "provdet/corpus.hpp"
#include "provdet/encoder.hpp"
#include "provdet/eval.hpp"
#include "provdet/vocab.hpp"

namespace provdet {

// Everything the pipeline reads from a config file. The encoder's vocab_size
// is filled in from the vocabulary at training time.
struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  double lambda = kDefaultLambda;
  double margin = kDefaultMargin;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool drop_last = false;
  double threshold = kDecisionThreshold;
  std::size_t max_vocab = kDefaultMaxVocab;
  bool include_comments = true;
  SplitRatios split;
  EncoderConfig encoder;

  // Throws ValidationError. The encoder part is checked separately once
  // vocab_size is known.
  void validate() const;
};

// `key = value` lines; '#' starts a comment. Unknown keys and malformed
// values throw ParseError naming the line.
void apply_config_value(TrainConfig& config, std::string_view key, std::string_view value);
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
// Inverse of parse_train_config; every key, fixed order.
std::string format_train_config(const TrainConfig& config);

// ---- Optimizer ----------------------------------------------------------------------

struct AdamHyper {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
};

// Bias-corrected Adam update for step t >= 1. State is sized on first use.
// A non-finite gradient throws ValidationError naming its block when a
// layout is given.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const AdamHyper& hyper, std::uint64_t t, const ParamLayout* layout = nullptr);

// ---- Batching and early stopping ---------------------------------------------------

// Every index appears in exactly one batch and every batch holds both
// classes. The classes are shuffled separately and dealt round-robin into
// floor(n / batch_size) batches (fewer if the minority class is smaller), so
// the ragged remainder is merged into earlier batches. With drop_last the
// batches are trimmed to batch_size and the surplus is left out.
std::vector<std::vector<std::size_t>> balanced_batches(const std::vector<bool>& is_llm,
                                                       std::size_t batch_size, std::uint64_t seed,
                                                       bool drop_last = false);

// Tracks validation F1; only a strict improvement resets the patience count.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Records one epoch; returns true if it is the new best.
  bool update(double metric);
  bool should_stop() const noexcept { return since_best_ >= patience_ && epochs_ > 0; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any update
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0;
};

// ---- Training ---------------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_ce = 0;
  double train_triplet = 0;
  double valid_loss = 0;  // mean cross-entropy, eval mode
  double valid_f1 = 0;
  double valid_accuracy = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;  // "early_stopping" or "max_epochs"

  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  ModelParams<float> best;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Deterministic for a given (config, data). Throws ValidationError if either
// set is empty or lacks a class.
TrainResult train(const TrainConfig& config, std::span<const Example> train_set,
                  std::span<const Example> valid_set, std::size_t vocab_size,
                  const EpochCallback& on_epoch = {});

// Lexes and encodes records in parallel; output order follows input order.
std::vector<Example> encode_records(std::span<const FunctionRecord> records, const Vocabulary& vocab,
                                    std::size_t max_len, bool include_comments);

struct EvalPass {
  double mean_ce = 0;
  Confusion confusion;
  std::vector<double> prob_llm;
};

EvalPass evaluate_examples(const ModelParams<float>& params, std::span<const Example> examples,
                           double threshold = kDecisionThreshold);

// Eval-mode projector embeddings.
std::vector<std::vector<float>> embed_examples(const ModelParams<float>& params,
                                               std::span<const Example> examples);

// Eval-mode inference; pred = LLM iff prob_llm >= threshold. Labels come
// from each record's origin. Throws ValidationError if the vocabulary does
// not match the encoder.
std::vector<Prediction> predict(const Checkpoint& checkpoint, std::span<const FunctionRecord> records,
                                double threshold = kDecisionThreshold);

}  // namespace provdet
