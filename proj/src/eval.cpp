#include "provdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace provdet {

Confusion confusion_from(std::span<const bool> predicted_llm, std::span<const bool> is_llm) {
  if (predicted_llm.size() != is_llm.size()) {
    throw ValidationError("confusion_from: prediction and label counts differ");
  }
  Confusion c;
  for (std::size_t i = 0; i < is_llm.size(); ++i) {
    if (predicted_llm[i]) {
      ++(is_llm[i] ? c.tp : c.fp);
    } else {
      ++(is_llm[i] ? c.fn : c.tn);
    }
  }
  return c;
}

ClassificationMetrics classification_metrics(const Confusion& c) {
  if (c.total() == 0) throw ValidationError("classification_metrics: empty confusion matrix");
  ClassificationMetrics m;
  const auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  m.accuracy = d(c.tp + c.tn) / d(c.total());
  if (c.tp + c.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = d(c.tp) / d(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = d(c.tp) / d(c.tp + c.fn);
  }
  // 2PR/(P+R) == 2TP/(2TP+FP+FN); the count form stays exact and is defined
  // whenever any positive was predicted or present.
  if (2 * c.tp + c.fp + c.fn == 0) {
    m.f1_undefined = true;
  } else {
    m.f1 = d(2 * c.tp) / d(2 * c.tp + c.fp + c.fn);
  }
  return m;
}

double auc(std::span<const double> scores, std::span<const bool> is_llm) {
  if (scores.size() != is_llm.size()) throw ValidationError("auc: score and label counts differ");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Midranks handle ties as one half per tied pair.
  double pos_rank_sum = 0;
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (is_llm[order[k]]) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double binomial_two_sided_half(std::uint64_t k, std::uint64_t n) {
  if (k > n) throw ValidationError("binomial test: k > n");
  if (n == 0) return 1.0;
  const std::uint64_t lo = std::min(k, n - k);
  // Sum of C(n, i) * 2^-n over the lower tail, in log space for large n.
  double tail = 0;
  for (std::uint64_t i = 0; i <= lo; ++i) {
    const double log_term = std::lgamma(static_cast<double>(n) + 1) -
                            std::lgamma(static_cast<double>(i) + 1) -
                            std::lgamma(static_cast<double>(n - i) + 1) -
                            static_cast<double>(n) * std::log(2.0);
    tail += std::exp(log_term);
  }
  return std::min(1.0, 2.0 * tail);
}

PairedComparison mcnemar_counts(std::uint64_t n01, std::uint64_t n10) {
  PairedComparison r;
  r.n01 = n01;
  r.n10 = n10;
  const std::uint64_t n = n01 + n10;
  if (n == 0) {
    r.p_value = 1.0;
    r.odds_ratio_undefined = true;
    r.odds_ratio = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  if (n < kMcNemarExactBelow) {
    r.exact = true;
    r.p_value = binomial_two_sided_half(std::min(n01, n10), n);
  } else {
    r.exact = false;
    const double diff = std::fabs(static_cast<double>(n01) - static_cast<double>(n10)) - 1.0;
    const double stat = std::max(0.0, diff) * std::max(0.0, diff) / static_cast<double>(n);
    r.p_value = std::erfc(std::sqrt(stat / 2.0));
  }
  r.odds_ratio = n10 == 0 ? std::numeric_limits<double>::infinity()
                          : static_cast<double>(n01) / static_cast<double>(n10);
  return r;
}

PairedComparison mcnemar(std::span<const bool> pred_a, std::span<const bool> pred_b,
                         std::span<const bool> labels) {
  if (pred_a.size() != labels.size() || pred_b.size() != labels.size()) {
    throw ValidationError("mcnemar: prediction and label counts differ");
  }
  std::uint64_t n01 = 0, n10 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a_ok = pred_a[i] == labels[i];
    const bool b_ok = pred_b[i] == labels[i];
    if (!a_ok && b_ok) ++n01;
    if (a_ok && !b_ok) ++n10;
  }
  return mcnemar_counts(n01, n10);
}

std::vector<double> holm_correct(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> out(m);
  double running = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double adj = std::min(1.0, static_cast<double>(m - i) * p_values[order[i]]);
    running = std::max(running, adj);
    out[order[i]] = running;
  }
  return out;
}

ZTestResult two_prop_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2,
                           std::uint64_t n2) {
  if (n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2) {
    throw ValidationError("two_prop_ztest: need 0 <= k <= n and n > 0");
  }
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  ZTestResult r;
  if (pooled <= 0.0 || pooled >= 1.0) {
    r.degenerate = p1 != p2;
    r.z = 0;
    r.p_value = 1;
    return r;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) *
                              (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  r.z = (p1 - p2) / se;
  r.p_value = std::erfc(std::fabs(r.z) / std::sqrt(2.0));
  return r;
}

// ---- Prediction files ----------------------------------------------------------

namespace {

bool parse_class(const nlohmann::json& v, const char* field, std::size_t line) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "llm") return true;
    if (s == "human") return false;
  } else if (v.is_boolean()) {
    return v.get<bool>();
  } else if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i == 0 || i == 1) return i == 1;
  }
  throw ParseError("line " + std::to_string(line) + ": field \"" + field +
                       "\" must be \"llm\", \"human\", 0 or 1",
                   line);
}

}  // namespace

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line) + ": malformed JSON", line);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string()) {
      throw ParseError("line " + std::to_string(line) + ": missing string field \"id\"", line);
    }
    Prediction p;
    p.id = obj["id"].get<std::string>();
    if (!obj.contains("prob_llm") || !obj["prob_llm"].is_number()) {
      throw ParseError("line " + std::to_string(line) + ": missing numeric \"prob_llm\"", line);
    }
    p.prob_llm = obj["prob_llm"].get<double>();
    p.pred_llm = obj.contains("pred") ? parse_class(obj["pred"], "pred", line)
                                      : decide_llm(p.prob_llm);
    if (obj.contains("label") && !obj["label"].is_null()) {
      p.label_llm = parse_class(obj["label"], "label", line);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string prediction_to_json_line(const Prediction& p) {
  nlohmann::ordered_json obj;
  obj["id"] = p.id;
  obj["prob_llm"] = p.prob_llm;
  obj["pred"] = p.pred_llm ? "llm" : "human";
  obj["label"] = p.label_llm ? nlohmann::ordered_json(*p.label_llm ? "llm" : "human")
                             : nlohmann::ordered_json(nullptr);
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  for (const auto& p : predictions) out << prediction_to_json_line(p) << '\n';
}

EvalReport evaluate(std::span<const Prediction> predictions) {
  const std::size_t n = predictions.size();
  // std::vector<bool> is not contiguous, so spans need plain arrays.
  const auto pred = std::make_unique<bool[]>(n);
  const auto label = std::make_unique<bool[]>(n);
  std::vector<double> scores(n);
  bool any_pos = false, any_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = predictions[i];
    if (!p.label_llm) throw ValidationError("evaluate: prediction \"" + p.id + "\" has no label");
    pred[i] = p.pred_llm;
    label[i] = *p.label_llm;
    scores[i] = p.prob_llm;
    (*p.label_llm ? any_pos : any_neg) = true;
  }
  EvalReport r;
  r.confusion = confusion_from({pred.get(), n}, {label.get(), n});
  r.metrics = classification_metrics(r.confusion);
  if (any_pos && any_neg) r.auc = auc(scores, {label.get(), n});
  return r;
}

}  // namespace provdet
