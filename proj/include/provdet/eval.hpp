#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provdet/common.hpp"

namespace provdet {

// Positive class is LLM-generated.
struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

Confusion confusion_from(std::span<const bool> predicted_llm, std::span<const bool> is_llm);

// Precision, recall and F1 fall back to 0 when their denominator is zero;
// the matching flag records that the value is a convention, not a ratio.
struct ClassificationMetrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

ClassificationMetrics classification_metrics(const Confusion& c);

// Mann-Whitney AUC: share of (positive, negative) pairs ranked correctly,
// ties counted one half. Throws ValidationError unless both classes occur.
double auc(std::span<const double> scores, std::span<const bool> is_llm);

double normal_cdf(double x);

// Two-sided exact binomial test p-value for k successes in n trials at 1/2.
double binomial_two_sided_half(std::uint64_t k, std::uint64_t n);

struct PairedComparison {
  std::uint64_t n01 = 0;  // A wrong, B right
  std::uint64_t n10 = 0;  // A right, B wrong
  double p_value = 1.0;
  bool exact = true;  // exact binomial (discordant < 25) or chi-square with continuity correction
  // n01 / n10; +inf when n10 == 0 and n01 > 0.
  double odds_ratio = 0;
  bool odds_ratio_undefined = false;  // no discordant pairs
};

inline constexpr std::uint64_t kMcNemarExactBelow = 25;

PairedComparison mcnemar_counts(std::uint64_t n01, std::uint64_t n10);
PairedComparison mcnemar(std::span<const bool> pred_a, std::span<const bool> pred_b,
                         std::span<const bool> labels);

// Holm step-down adjustment; output in input order.
std::vector<double> holm_correct(std::span<const double> p_values);

struct ZTestResult {
  double z = 0;
  double p_value = 1;
  // Pooled proportion is 0 or 1 while the sample proportions differ; cannot
  // happen for valid counts but is reported rather than dividing by zero.
  bool degenerate = false;
};

// Pooled two-proportion z-test, two-sided.
ZTestResult two_prop_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2, std::uint64_t n2);

// ---- Prediction files ----------------------------------------------------------

struct Prediction {
  std::string id;
  double prob_llm = 0;
  bool pred_llm = false;
  std::optional<bool> label_llm;
  bool operator==(const Prediction&) const = default;
};

inline constexpr double kDecisionThreshold = 0.5;

// Binary decision: LLM iff prob_llm >= 0.5.
inline bool decide_llm(double prob_llm) noexcept { return prob_llm >= kDecisionThreshold; }

// JSONL {"id","prob_llm","pred","label"}; pred/label are "llm"/"human"
// (0/1 and booleans are accepted on input). Throws ParseError with the line.
std::vector<Prediction> read_predictions(std::istream& in);
void write_predictions(std::ostream& out, std::span<const Prediction> predictions);
std::string prediction_to_json_line(const Prediction& p);

struct EvalReport {
  Confusion confusion;
  ClassificationMetrics metrics;
  std::optional<double> auc;  // absent when only one class is present
};

// Requires every prediction to carry a label.
EvalReport evaluate(std::span<const Prediction> predictions);

}  // namespace provdet
