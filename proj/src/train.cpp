#include "provdet/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "provdet/rng.hpp"

namespace provdet {

// ---- Config ---------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 2) throw ValidationError("batch_size must be at least 2");
  if (max_epochs == 0) throw ValidationError("max_epochs must be positive");
  if (patience >= max_epochs) throw ValidationError("patience must be smaller than max_epochs");
  if (lambda < 0) throw ValidationError("lambda must be non-negative");
  if (!(margin > 0)) throw ValidationError("margin must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0)) throw ValidationError("adam_epsilon must be positive");
  if (!(threshold >= 0 && threshold <= 1)) throw ValidationError("threshold must lie in [0, 1]");
  if (max_vocab < kNumSpecials + 1) throw ValidationError("max_vocab must be at least 4");
  if (split.train + split.valid + split.test == 0) throw ValidationError("split ratios must not all be zero");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::size_t as_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  if (!parse_number(v, out)) throw ParseError("config: " + std::string(key) + " expects a non-negative integer");
  return out;
}

double as_double(std::string_view key, std::string_view v) {
  double out = 0;
  if (!parse_number(v, out) || !std::isfinite(out)) {
    throw ParseError("config: " + std::string(key) + " expects a number");
  }
  return out;
}

bool as_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("config: " + std::string(key) + " expects true or false");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

void apply_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  const std::string_view v = trim(value);
  if (key == "learning_rate") c.learning_rate = as_double(key, v);
  else if (key == "batch_size") c.batch_size = as_size(key, v);
  else if (key == "max_epochs") c.max_epochs = as_size(key, v);
  else if (key == "patience") c.patience = as_size(key, v);
  else if (key == "lambda") c.lambda = as_double(key, v);
  else if (key == "margin") c.margin = as_double(key, v);
  else if (key == "seed") {
    std::uint64_t s = 0;
    if (!parse_number(v, s)) throw ParseError("config: seed expects a non-negative integer");
    c.seed = s;
  }
  else if (key == "adam_beta1") c.adam_beta1 = as_double(key, v);
  else if (key == "adam_beta2") c.adam_beta2 = as_double(key, v);
  else if (key == "adam_epsilon") c.adam_epsilon = as_double(key, v);
  else if (key == "drop_last") c.drop_last = as_bool(key, v);
  else if (key == "threshold") c.threshold = as_double(key, v);
  else if (key == "max_vocab") c.max_vocab = as_size(key, v);
  else if (key == "include_comments") c.include_comments = as_bool(key, v);
  else if (key == "split") {
    std::size_t parts[3];
    std::string_view rest = v;
    for (int i = 0; i < 3; ++i) {
      const auto colon = rest.find(':');
      if ((i < 2) != (colon != std::string_view::npos)) throw ParseError("config: split expects a:b:c");
      parts[i] = as_size(key, trim(rest.substr(0, colon)));
      rest = colon == std::string_view::npos ? std::string_view{} : rest.substr(colon + 1);
    }
    c.split = {parts[0], parts[1], parts[2]};
  }
  else if (key == "embed_dim") c.encoder.embed_dim = as_size(key, v);
  else if (key == "num_layers") c.encoder.num_layers = as_size(key, v);
  else if (key == "num_heads") c.encoder.num_heads = as_size(key, v);
  else if (key == "ff_dim") c.encoder.ff_dim = as_size(key, v);
  else if (key == "max_len") c.encoder.max_len = as_size(key, v);
  else if (key == "dropout_p") c.encoder.dropout_p = as_double(key, v);
  else if (key == "projector_dim") c.encoder.projector_dim = as_size(key, v);
  else if (key == "classifier_input") {
    const auto ci = parse_classifier_input(v);
    if (!ci) throw ParseError("config: classifier_input expects pooled or projected");
    c.encoder.classifier_input = *ci;
  }
  else throw ParseError("config: unknown key \"" + std::string(key) + "\"");
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::string_view s = text;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line) + ": expected key = value", line);
    }
    try {
      apply_config_value(base, trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError("config line " + std::to_string(line) + ": " + e.what(), line);
    }
  }
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_train_config(in, std::move(base));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o << "learning_rate = " << fmt(c.learning_rate) << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "max_epochs = " << c.max_epochs << "\n"
    << "patience = " << c.patience << "\n"
    << "lambda = " << fmt(c.lambda) << "\n"
    << "margin = " << fmt(c.margin) << "\n"
    << "seed = " << c.seed << "\n"
    << "adam_beta1 = " << fmt(c.adam_beta1) << "\n"
    << "adam_beta2 = " << fmt(c.adam_beta2) << "\n"
    << "adam_epsilon = " << fmt(c.adam_epsilon) << "\n"
    << "drop_last = " << (c.drop_last ? "true" : "false") << "\n"
    << "threshold = " << fmt(c.threshold) << "\n"
    << "max_vocab = " << c.max_vocab << "\n"
    << "include_comments = " << (c.include_comments ? "true" : "false") << "\n"
    << "split = " << c.split.train << ":" << c.split.valid << ":" << c.split.test << "\n"
    << "embed_dim = " << c.encoder.embed_dim << "\n"
    << "num_layers = " << c.encoder.num_layers << "\n"
    << "num_heads = " << c.encoder.num_heads << "\n"
    << "ff_dim = " << c.encoder.ff_dim << "\n"
    << "max_len = " << c.encoder.max_len << "\n"
    << "dropout_p = " << fmt(c.encoder.dropout_p) << "\n"
    << "projector_dim = " << c.encoder.projector_dim << "\n"
    << "classifier_input = " << to_string(c.encoder.classifier_input) << "\n";
  return o.str();
}

// ---- Optimizer ----------------------------------------------------------------------

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const AdamHyper& h, std::uint64_t t, const ParamLayout* layout) {
  if (t == 0) throw ValidationError("adam_step: step index starts at 1");
  if (grads.size() != params.size()) throw ValidationError("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0f);
    state.v.assign(params.size(), 0.0f);
  }
  if (state.m.size() != params.size()) throw ValidationError("adam_step: optimizer state size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      const std::string where = layout ? " in block \"" + layout->block_containing(i).name + "\"" : "";
      throw ValidationError("adam_step: non-finite gradient" + where);
    }
  }
  const double td = static_cast<double>(t);
  const double bc1 = 1.0 - std::pow(h.beta1, td);
  const double bc2 = 1.0 - std::pow(h.beta2, td);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    const double v = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    if (g == 0.0 && m == 0.0) continue;
    const double update = h.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + h.epsilon);
    params[i] = static_cast<float>(params[i] - update);
  }
}

// ---- Batching -------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> balanced_batches(const std::vector<bool>& is_llm,
                                                       std::size_t batch_size, std::uint64_t seed,
                                                       bool drop_last) {
  if (batch_size < 2) throw ValidationError("balanced_batches: batch_size must be at least 2");
  std::vector<std::size_t> cls[2];
  for (std::size_t i = 0; i < is_llm.size(); ++i) cls[is_llm[i] ? 1 : 0].push_back(i);
  if (cls[0].empty() || cls[1].empty()) throw ValidationError("balanced_batches: both classes are required");

  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(cls[0]));
  rng.shuffle(std::span<std::size_t>(cls[1]));
  const std::size_t first = static_cast<std::size_t>(rng.below(2));

  const std::size_t n = is_llm.size();
  std::size_t nb = std::min({n / batch_size, cls[0].size(), cls[1].size()});
  nb = std::max<std::size_t>(nb, 1);

  std::vector<std::vector<std::size_t>> batches(nb);
  std::size_t k = 0;
  for (const std::size_t c : {first, 1 - first}) {
    for (const std::size_t idx : cls[c]) batches[k++ % nb].push_back(idx);
  }
  if (drop_last) {
    for (auto& b : batches) {
      while (b.size() > batch_size) {
        std::size_t count_llm = 0;
        for (const std::size_t i : b) count_llm += is_llm[i] ? 1 : 0;
        const std::size_t count_human = b.size() - count_llm;
        for (std::size_t j = b.size(); j-- > 0;) {
          if ((is_llm[b[j]] ? count_llm : count_human) > 1) {
            b.erase(b.begin() + static_cast<std::ptrdiff_t>(j));
            break;
          }
        }
      }
    }
  }
  return batches;
}

bool EarlyStopper::update(double metric) {
  ++epochs_;
  if (best_epoch_ == 0 || metric > best_) {
    best_ = metric;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,train_ce,train_triplet,valid_loss,valid_f1,valid_accuracy,best\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.train_ce) << ','
        << fmt(e.train_triplet) << ',' << fmt(e.valid_loss) << ',' << fmt(e.valid_f1) << ','
        << fmt(e.valid_accuracy) << ',' << (e.epoch == best_epoch ? 1 : 0) << '\n';
  }
}

// ---- Training -----------------------------------------------------------------------

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kEpochTag = 0x65706f6368ULL;

void require_both_classes(std::span<const Example> set, const char* what) {
  bool pos = false, neg = false;
  for (const auto& e : set) (e.is_llm ? pos : neg) = true;
  if (!pos || !neg) throw ValidationError(std::string(what) + " set must contain both classes");
}

}  // namespace

EvalPass evaluate_examples(const ModelParams<float>& params, std::span<const Example> examples,
                           double threshold) {
  EvalPass out;
  out.prob_llm.reserve(examples.size());
  for (const auto& e : examples) {
    const auto r = forward(params, e.ids, ForwardMode::eval());
    out.mean_ce += cross_entropy(r.logits[0], r.logits[1], e.is_llm).loss;
    const bool pred = r.prob_llm() >= threshold;
    if (pred) {
      ++(e.is_llm ? out.confusion.tp : out.confusion.fp);
    } else {
      ++(e.is_llm ? out.confusion.fn : out.confusion.tn);
    }
    out.prob_llm.push_back(r.prob_llm());
  }
  if (!examples.empty()) out.mean_ce /= static_cast<double>(examples.size());
  return out;
}

std::vector<std::vector<float>> embed_examples(const ModelParams<float>& params,
                                               std::span<const Example> examples) {
  std::vector<std::vector<float>> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(forward(params, e.ids, ForwardMode::eval()).embedding);
  return out;
}

TrainResult train(const TrainConfig& config, std::span<const Example> train_set,
                  std::span<const Example> valid_set, std::size_t vocab_size,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || valid_set.empty()) throw ValidationError("train and valid sets must be non-empty");
  require_both_classes(train_set, "training");
  require_both_classes(valid_set, "validation");

  EncoderConfig ec = config.encoder;
  ec.vocab_size = vocab_size;
  ec.validate();
  ModelParams<float> params = init_params<float>(ec, derive_seed(config.seed, kInitTag));

  std::vector<bool> labels(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) labels[i] = train_set[i].is_llm;

  const AdamHyper hyper{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
  const LossConfig loss_cfg{config.lambda, config.margin};
  AdamState state;
  std::uint64_t step = 0;
  std::vector<float> grads(params.values.size());
  EarlyStopper stopper(config.patience);

  TrainResult result;
  result.best = params;
  result.history.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(derive_seed(config.seed, kEpochTag), epoch);
    const auto batches = balanced_batches(labels, config.batch_size, epoch_seed, config.drop_last);
    EpochStats stats;
    stats.epoch = epoch;
    std::vector<Example> batch;
    for (std::size_t s = 0; s < batches.size(); ++s) {
      batch.clear();
      for (const std::size_t i : batches[s]) batch.push_back(train_set[i]);
      std::fill(grads.begin(), grads.end(), 0.0f);
      const auto bl = batch_loss<float>(params, batch, loss_cfg, derive_seed(epoch_seed, s), grads);
      adam_step(params.values, grads, state, hyper, ++step, &params.layout);
      stats.train_loss += bl.total;
      stats.train_ce += bl.ce;
      stats.train_triplet += bl.triplet;
    }
    const double nb = static_cast<double>(batches.size());
    stats.train_loss /= nb;
    stats.train_ce /= nb;
    stats.train_triplet /= nb;

    const auto pass = evaluate_examples(params, valid_set, config.threshold);
    const auto m = classification_metrics(pass.confusion);
    stats.valid_loss = pass.mean_ce;
    stats.valid_f1 = m.f1;
    stats.valid_accuracy = m.accuracy;
    result.history.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (stopper.update(stats.valid_f1)) result.best.values = params.values;
    if (stopper.should_stop()) {
      result.history.stop_reason = "early_stopping";
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  return result;
}

std::vector<Example> encode_records(std::span<const FunctionRecord> records, const Vocabulary& vocab,
                                    std::size_t max_len, bool include_comments) {
  std::vector<Example> out(records.size());
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  const std::size_t chunk = (records.size() + workers - 1) / std::max<std::size_t>(workers, 1);
  std::vector<std::exception_ptr> errors(workers);
  const auto work = [&](std::size_t w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(records.size(), lo + chunk);
    try {
      for (std::size_t i = lo; i < hi; ++i) {
        out[i].ids = encode(records[i].code, records[i].language, vocab, max_len, include_comments);
        out[i].is_llm = records[i].origin == Origin::LLM;
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1 || records.size() < 64) {
    for (std::size_t w = 0; w < workers; ++w) work(w);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<Prediction> predict(const Checkpoint& checkpoint, std::span<const FunctionRecord> records,
                                double threshold) {
  const auto& params = checkpoint.params;
  if (checkpoint.vocab.size() != params.config.vocab_size) {
    throw ValidationError("predict: vocabulary does not match the encoder");
  }
  const auto examples = encode_records(records, checkpoint.vocab, params.config.max_len,
                                       checkpoint.include_comments);
  std::vector<Prediction> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = forward(params, examples[i].ids, ForwardMode::eval());
    Prediction p;
    p.id = records[i].id;
    p.prob_llm = r.prob_llm();
    p.pred_llm = p.prob_llm >= threshold;
    p.label_llm = records[i].origin == Origin::LLM;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace provdet
