#include "provdet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "provdet/checkpoint.hpp"
#include "provdet/corpus.hpp"
#include "provdet/eval.hpp"
#include "provdet/genclient.hpp"
#include "provdet/lexer.hpp"
#include "provdet/metrics.hpp"
#include "provdet/train.hpp"
#include "provdet/vocab.hpp"

namespace provdet::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---- File helpers -----------------------------------------------------------------

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

class OutFile {
 public:
  explicit OutFile(fs::path path) : path_(std::move(path)), out_(path_, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path_.string());
  }
  std::ostream& stream() { return out_; }
  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
    out_.close();
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  OutFile f(path);
  f.stream() << text;
  f.close();
}

std::string dump(const ordered_json& j) {
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

// Refuses to overwrite an input file.
void check_distinct(const std::vector<fs::path>& inputs, const fs::path& output) {
  std::error_code ec;
  if (!fs::exists(output, ec)) return;
  for (const auto& in : inputs) {
    if (fs::exists(in, ec) && fs::equivalent(in, output, ec)) {
      throw ValidationError("output " + output.string() + " would overwrite input " + in.string());
    }
  }
}

std::vector<FunctionRecord> read_records(const fs::path& path) {
  auto in = open_in(path);
  try {
    return parse_records_strict(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<Prediction> read_prediction_file(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_predictions(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ordered_json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::optional<Split> parse_split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  auto sp = parse_split(s);
  if (!sp) throw ValidationError("unknown split '" + s + "' (train, valid, test or all)");
  return sp;
}

std::vector<FunctionRecord> select_split(std::vector<FunctionRecord> records, std::optional<Split> split) {
  if (!split) return records;
  std::erase_if(records, [&](const FunctionRecord& r) { return r.split != split; });
  return records;
}

// Pairs each labelled record with its prediction. A prediction carrying a
// label matches on (id, label); unlabelled ones match the k-th record with
// that id.
std::vector<Prediction> align_predictions(std::span<const Prediction> preds,
                                          std::span<const FunctionRecord> labels, const std::string& name,
                                          std::ostream& log) {
  std::map<std::pair<std::string, bool>, std::size_t> labeled;
  std::map<std::string, std::vector<std::size_t>> unlabeled;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    if (p.label_llm) {
      if (!labeled.emplace(std::pair{p.id, *p.label_llm}, i).second) {
        throw ValidationError(name + ": duplicate prediction for " + p.id);
      }
    } else {
      unlabeled[p.id].push_back(i);
    }
  }
  std::map<std::string, std::size_t> seen;
  std::vector<bool> used(preds.size(), false);
  std::vector<Prediction> out;
  out.reserve(labels.size());
  for (const auto& r : labels) {
    const bool y = r.origin == Origin::LLM;
    std::optional<std::size_t> idx;
    if (auto it = labeled.find({r.id, y}); it != labeled.end()) {
      idx = it->second;
    } else if (auto u = unlabeled.find(r.id); u != unlabeled.end()) {
      const std::size_t k = seen[r.id]++;
      if (k < u->second.size()) idx = u->second[k];
    }
    if (!idx) {
      throw ValidationError(name + ": no prediction for " + r.id + " (" + std::string(to_string(r.origin)) + ")");
    }
    used[*idx] = true;
    Prediction p = preds[*idx];
    p.label_llm = y;
    out.push_back(std::move(p));
  }
  const auto extra = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
  if (extra > 0) log << name << ": " << extra << " predictions without a labelled record ignored\n";
  return out;
}

// ---- Shared options ------------------------------------------------------------------

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  TrainConfig load() const {
    TrainConfig cfg;
    if (!config.empty()) cfg = load_train_config(config);
    if (seed_opt->count() > 0) cfg.seed = seed;
    return cfg;
  }
};

template <class T, class U>
void override_if(CLI::Option* opt, T& dst, const U& value) {
  if (opt->count() > 0) dst = static_cast<T>(value);
}

// ---- curate -----------------------------------------------------------------------

struct CurateArgs {
  std::string in, generated, out, rejects;
  double q_low = 0.10, q_high = 0.90;
  bool no_split = false;
};

void run_curate(const CurateArgs& a, const Globals& g, std::ostream& log) {
  const TrainConfig cfg = g.load();
  check_distinct({a.in, a.generated}, a.out);
  check_distinct({a.in, a.generated}, a.rejects);
  auto records = read_records(a.in);

  std::vector<FunctionRecord> humans, llm;
  for (auto& r : records) (r.origin == Origin::Human ? humans : llm).push_back(std::move(r));

  std::vector<std::string> reject_lines;
  auto reject = [&](const std::string& id, const std::string& rule) {
    ordered_json j;
    j["id"] = id;
    j["rules"] = ordered_json::array({rule});
    reject_lines.push_back(j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
  };

  if (!a.generated.empty()) {
    auto in = open_in(a.generated);
    std::vector<GenerationOutcome> outcomes;
    try {
      outcomes = read_outcomes(in);
    } catch (const ParseError& e) {
      throw ParseError(a.generated + ": " + e.what(), e.line());
    }
    std::map<std::string, const FunctionRecord*> by_id;
    for (const auto& h : humans) by_id.emplace(h.id, &h);
    for (const auto& o : outcomes) {
      auto it = by_id.find(o.record_id);
      if (it == by_id.end()) {
        reject(o.record_id, "unknown_id");
      } else if (o.status != GenStatus::Success || !o.extracted_code) {
        reject(o.record_id, "generation_" + std::string(to_string(o.status)));
      } else {
        const FunctionRecord& h = *it->second;
        llm.push_back({h.id, h.language, h.docstring, *o.extracted_code, Origin::LLM, std::nullopt});
      }
    }
  }

  auto cur = curate_records(humans, NoiseRuleConfig{}, a.q_low, a.q_high);
  for (const auto& r : cur.filtered.rejected) reject_lines.push_back(rejection_to_json_line(r));
  for (const auto& [lang, b] : cur.bounds) {
    log << "curate: " << to_string(lang) << " docstring length bounds (" << b.low << ", " << b.high << "]\n";
  }

  std::vector<FunctionRecord> kept;
  if (llm.empty()) {
    kept = std::move(cur.filtered.retained);
  } else {
    auto paired = pair_records(cur.filtered.retained, llm);
    std::set<std::string> human_ids;
    for (const auto& h : humans) human_ids.insert(h.id);
    for (auto& p : paired.pairs) {
      kept.push_back(std::move(p.human));
      kept.push_back(std::move(p.generated));
    }
    for (const auto& id : paired.unmatched_human) reject(id, "unpaired_human");
    for (const auto& id : paired.unmatched_generated) {
      reject(id, human_ids.count(id) > 0 ? "human_rejected" : "unpaired_llm");
    }
  }

  if (!a.no_split && !kept.empty()) {
    const auto splits = split_per_language(kept, cfg.seed, cfg.split);
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].split = splits[i];
  }

  OutFile out(a.out);
  write_records(out.stream(), kept);
  out.close();
  OutFile rej(a.rejects);
  for (const auto& line : reject_lines) rej.stream() << line << '\n';
  rej.close();
  log << "curate: " << records.size() << " read, " << kept.size() << " written, " << reject_lines.size()
      << " rejected\n";
}

// ---- generate ---------------------------------------------------------------------

struct GenerateArgs {
  std::string in, out, fixture, prompt = "docstring";
  EndpointConfig endpoint;
  double temperature = 0;
  int max_tokens = 0;
  std::size_t backoff_ms = 1000;
  std::size_t timeout_s = 120;
  CLI::Option* temperature_opt = nullptr;
  CLI::Option* max_tokens_opt = nullptr;
};

void run_generate(GenerateArgs a, const Globals& g, std::ostream& log) {
  (void)g.load();
  check_distinct({a.in, a.fixture}, a.out);
  if (a.prompt != "docstring" && a.prompt != "signature") {
    throw ValidationError("--prompt must be docstring or signature");
  }
  if (a.temperature_opt->count() > 0) a.endpoint.temperature = a.temperature;
  if (a.max_tokens_opt->count() > 0) a.endpoint.max_tokens = a.max_tokens;
  a.endpoint.initial_backoff = std::chrono::milliseconds(a.backoff_ms);
  a.endpoint.timeout = std::chrono::seconds(a.timeout_s);

  const auto records = read_records(a.in);
  std::vector<GenerationRequest> requests;
  std::size_t fallback = 0;
  for (const auto& r : records) {
    if (r.origin != Origin::Human) continue;
    GenerationRequest req{r.id, {}, r.language};
    if (a.prompt == "signature" && r.language == Language::Java) {
      const std::string sig = java_signature(r.code);
      if (sig.empty()) throw ValidationError("no method signature in record " + r.id);
      req.prompt = build_signature_prompt(r.docstring, sig);
    } else {
      if (a.prompt == "signature") ++fallback;
      req.prompt = build_generation_prompt(r.docstring, r.language);
    }
    requests.push_back(std::move(req));
  }
  if (fallback > 0) log << "generate: " << fallback << " non-Java records use the docstring prompt\n";

  std::vector<GenerationOutcome> outcomes;
  if (!a.fixture.empty()) {
    auto in = open_in(a.fixture);
    outcomes = generate_offline(requests, load_fixture(in));
  } else {
    auto transport = make_http_transport(a.endpoint, api_key_from_env(a.endpoint));
    outcomes = generate_batch(requests, a.endpoint, *transport);
  }

  OutFile out(a.out);
  std::map<GenStatus, std::size_t> counts;
  for (const auto& o : outcomes) {
    out.stream() << outcome_to_json_line(o) << '\n';
    ++counts[o.status];
  }
  out.close();
  const double n = static_cast<double>(std::max<std::size_t>(outcomes.size(), 1));
  log << "generate: " << outcomes.size() << " requests\n";
  for (GenStatus s : {GenStatus::Success, GenStatus::EmptyOrIncomplete, GenStatus::Fail}) {
    char line[96];
    std::snprintf(line, sizeof line, "  %-20s %8zu %7.2f%%\n", std::string(to_string(s)).c_str(), counts[s],
                  100.0 * static_cast<double>(counts[s]) / n);
    log << line;
  }
}

// ---- strip-comments ---------------------------------------------------------------

struct StripArgs {
  std::string in, out;
};

void run_strip(const StripArgs& a, std::ostream& log) {
  check_distinct({a.in}, a.out);
  auto records = read_records(a.in);
  for (auto& r : records) {
    try {
      r.code = strip_comments(r.code, r.language);
    } catch (const LexError& e) {
      throw ParseError("record " + r.id + ": " + e.what());
    }
  }
  OutFile out(a.out);
  write_records(out.stream(), records);
  out.close();
  log << "strip-comments: " << records.size() << " records\n";
}

// ---- metrics ----------------------------------------------------------------------

struct MetricsArgs {
  std::string in, out, summary;
};

void run_metrics(const MetricsArgs& a, std::ostream& log) {
  check_distinct({a.in}, a.out);
  const auto records = read_records(a.in);
  OutFile out(a.out);
  out.stream() << "id,language,origin,nloc,ccn,tc,lfn\n";
  for (const auto& r : records) {
    CodeMetrics m;
    try {
      m = compute_metrics(r.code, r.language);
    } catch (const LexError& e) {
      throw ParseError("record " + r.id + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("record " + r.id + ": " + e.what());
    }
    out.stream() << csv_field(r.id) << ',' << to_string(r.language) << ',' << to_string(r.origin) << ','
                 << m.nloc << ',' << m.ccn << ',' << m.token_count << ',' << m.lfn << '\n';
  }
  out.close();

  ordered_json groups = ordered_json::array();
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-6s %8s %9s %8s %9s %8s %13s\n", "language", "origin", "count",
                "avg_nloc", "avg_ccn", "avg_tc", "avg_lfn", "unique_tokens");
  log << line;
  for (Language lang : {Language::Python, Language::Java}) {
    for (Origin origin : {Origin::Human, Origin::LLM}) {
      std::vector<FunctionRecord> group;
      for (const auto& r : records) {
        if (r.language == lang && r.origin == origin) group.push_back(r);
      }
      if (group.empty()) continue;
      const auto s = corpus_summary(group);
      std::snprintf(line, sizeof line, "%-8s %-6s %8zu %9.2f %8.2f %9.2f %8.2f %13zu\n",
                    std::string(to_string(lang)).c_str(), std::string(to_string(origin)).c_str(), s.count,
                    s.avg_nloc, s.avg_ccn, s.avg_tc, s.avg_lfn, s.unique_tokens);
      log << line;
      ordered_json j;
      j["language"] = to_string(lang);
      j["origin"] = to_string(origin);
      j["count"] = s.count;
      j["avg_nloc"] = s.avg_nloc;
      j["avg_ccn"] = s.avg_ccn;
      j["avg_tc"] = s.avg_tc;
      j["avg_lfn"] = s.avg_lfn;
      j["unique_tokens"] = s.unique_tokens;
      groups.push_back(std::move(j));
    }
  }
  if (!a.summary.empty()) {
    check_distinct({a.in}, a.summary);
    ordered_json j;
    j["groups"] = std::move(groups);
    write_text(a.summary, dump(j));
  }
}

// ---- build-vocab ------------------------------------------------------------------

struct VocabArgs {
  std::string in, out, split = "train";
  std::size_t max_vocab = 0;
  bool include_comments = true;
  CLI::Option* max_vocab_opt = nullptr;
  CLI::Option* comments_opt = nullptr;
};

void run_build_vocab(const VocabArgs& a, const Globals& g, std::ostream& log) {
  TrainConfig cfg = g.load();
  override_if(a.max_vocab_opt, cfg.max_vocab, a.max_vocab);
  override_if(a.comments_opt, cfg.include_comments, a.include_comments);
  check_distinct({a.in}, a.out);
  const auto records = select_split(read_records(a.in), parse_split_filter(a.split));
  if (records.empty()) {
    throw ValidationError("no records in split '" + a.split + "' (use --split all for unsplit data)");
  }
  std::vector<std::vector<std::string>> streams;
  streams.reserve(records.size());
  for (const auto& r : records) {
    try {
      streams.push_back(token_strings(r.code, r.language, cfg.include_comments));
    } catch (const LexError& e) {
      throw ParseError("record " + r.id + ": " + e.what());
    }
  }
  const auto vocab = build_vocab(streams, cfg.max_vocab);
  OutFile out(a.out);
  vocab.save(out.stream());
  out.close();
  log << "build-vocab: " << vocab.size() << " entries from " << records.size() << " records\n";
}

// ---- train ------------------------------------------------------------------------

struct TrainArgs {
  std::string data, train_file, valid_file, vocab, out, history;
  double lr = 0, lambda = 0, margin = 0;
  std::size_t epochs = 0, batch_size = 0, patience = 0;
  CLI::Option *lr_opt = nullptr, *lambda_opt = nullptr, *margin_opt = nullptr;
  CLI::Option *epochs_opt = nullptr, *batch_opt = nullptr, *patience_opt = nullptr;
};

void run_train(const TrainArgs& a, const Globals& g, std::ostream& log) {
  TrainConfig cfg = g.load();
  override_if(a.lr_opt, cfg.learning_rate, a.lr);
  override_if(a.lambda_opt, cfg.lambda, a.lambda);
  override_if(a.margin_opt, cfg.margin, a.margin);
  override_if(a.epochs_opt, cfg.max_epochs, a.epochs);
  override_if(a.batch_opt, cfg.batch_size, a.batch_size);
  override_if(a.patience_opt, cfg.patience, a.patience);
  cfg.validate();

  std::vector<FunctionRecord> train_recs, valid_recs;
  if (!a.data.empty()) {
    if (!a.train_file.empty() || !a.valid_file.empty()) {
      throw ValidationError("--data excludes --train/--valid");
    }
    const auto all = read_records(a.data);
    train_recs = select_split(all, Split::Train);
    valid_recs = select_split(all, Split::Valid);
  } else if (!a.train_file.empty() && !a.valid_file.empty()) {
    train_recs = read_records(a.train_file);
    valid_recs = read_records(a.valid_file);
  } else {
    throw ValidationError("give --data, or both --train and --valid");
  }

  auto vin = open_in(a.vocab);
  const Vocabulary vocab = Vocabulary::load(vin);
  const auto tr = encode_records(train_recs, vocab, cfg.encoder.max_len, cfg.include_comments);
  const auto va = encode_records(valid_recs, vocab, cfg.encoder.max_len, cfg.include_comments);
  log << "train: " << tr.size() << " train / " << va.size() << " valid examples, vocab " << vocab.size() << "\n";

  auto result = train(cfg, tr, va, vocab.size(), [&](const EpochStats& s) {
    char line[200];
    std::snprintf(line, sizeof line,
                  "epoch %zu loss %.6f ce %.6f triplet %.6f valid_loss %.6f valid_f1 %.4f valid_acc %.4f\n",
                  s.epoch, s.train_loss, s.train_ce, s.train_triplet, s.valid_loss, s.valid_f1,
                  s.valid_accuracy);
    log << line << std::flush;
  });
  log << "train: best epoch " << result.history.best_epoch << " (" << result.history.stop_reason << ")\n";

  Checkpoint ck{std::move(result.best), vocab, cfg.include_comments,
                TrainingInfo{result.history.best_epoch, result.history.stop_reason}};
  save_checkpoint(a.out, ck);
  if (!a.history.empty()) {
    OutFile h(a.history);
    result.history.write_csv(h.stream());
    h.close();
  }
}

// ---- classify ---------------------------------------------------------------------

struct ClassifyArgs {
  std::string model, in, out, split = "all";
  double threshold = 0;
  CLI::Option* threshold_opt = nullptr;
};

void run_classify(const ClassifyArgs& a, const Globals& g, std::ostream& log) {
  TrainConfig cfg = g.load();
  override_if(a.threshold_opt, cfg.threshold, a.threshold);
  check_distinct({a.in}, a.out);
  const Checkpoint ck = load_checkpoint(a.model);
  const auto records = select_split(read_records(a.in), parse_split_filter(a.split));
  if (records.empty()) throw ValidationError("no records to classify");
  const auto preds = predict(ck, records, cfg.threshold);
  OutFile out(a.out);
  write_predictions(out.stream(), preds);
  out.close();
  const auto llm = std::count_if(preds.begin(), preds.end(), [](const Prediction& p) { return p.pred_llm; });
  log << "classify: " << preds.size() << " records, " << llm << " predicted llm\n";
}

// ---- evaluate ---------------------------------------------------------------------

struct EvaluateArgs {
  std::string pred, labels, out, table, split = "all";
};

void run_evaluate(const EvaluateArgs& a, std::ostream& log) {
  check_distinct({a.pred, a.labels}, a.out);
  auto preds = read_prediction_file(a.pred);
  if (!a.labels.empty()) {
    const auto labels = select_split(read_records(a.labels), parse_split_filter(a.split));
    preds = align_predictions(preds, labels, a.pred, log);
  }
  const auto rep = evaluate(preds);
  const auto& m = rep.metrics;

  ordered_json j;
  j["n"] = rep.confusion.total();
  j["confusion"] = {{"tp", rep.confusion.tp}, {"fp", rep.confusion.fp}, {"fn", rep.confusion.fn},
                    {"tn", rep.confusion.tn}};
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auc"] = rep.auc ? ordered_json(*rep.auc) : ordered_json(nullptr);
  j["undefined"] = {{"precision", m.precision_undefined}, {"recall", m.recall_undefined},
                    {"f1", m.f1_undefined}};
  write_text(a.out, dump(j));

  std::ostringstream t;
  t << "n          " << rep.confusion.total() << "\n";
  t << "tp fp fn tn " << rep.confusion.tp << ' ' << rep.confusion.fp << ' ' << rep.confusion.fn << ' '
    << rep.confusion.tn << "\n";
  t << "accuracy   " << fmt("%.4f", m.accuracy) << "\n";
  t << "precision  " << fmt("%.4f", m.precision) << (m.precision_undefined ? " (undefined)" : "") << "\n";
  t << "recall     " << fmt("%.4f", m.recall) << (m.recall_undefined ? " (undefined)" : "") << "\n";
  t << "f1         " << fmt("%.4f", m.f1) << (m.f1_undefined ? " (undefined)" : "") << "\n";
  t << "auc        " << (rep.auc ? fmt("%.4f", *rep.auc) : std::string("n/a")) << "\n";
  log << t.str();
  if (!a.table.empty()) write_text(a.table, t.str());
}

// ---- compare ----------------------------------------------------------------------

struct CompareArgs {
  std::string a, labels, out, table, split = "all";
  std::vector<std::string> b;
};

void run_compare(const CompareArgs& a, std::ostream& log) {
  std::vector<fs::path> inputs{a.a, a.labels};
  inputs.insert(inputs.end(), a.b.begin(), a.b.end());
  check_distinct(inputs, a.out);
  const auto labels = select_split(read_records(a.labels), parse_split_filter(a.split));
  if (labels.empty()) throw ValidationError("no labelled records in split '" + a.split + "'");
  const auto pa = align_predictions(read_prediction_file(a.a), labels, a.a, log);
  const std::size_t n = pa.size();
  std::vector<bool> y(n), pred_a(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = *pa[i].label_llm;
    pred_a[i] = pa[i].pred_llm;
  }
  auto correct = [&](const std::vector<bool>& p) {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < n; ++i) k += p[i] == y[i] ? 1 : 0;
    return k;
  };
  const auto bits = [](const std::vector<bool>& v) {
    auto p = std::make_unique<bool[]>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i];
    return p;
  };
  const auto ya = bits(y);
  const auto aa = bits(pred_a);
  const std::uint64_t ka = correct(pred_a);

  struct Row {
    std::string name;
    PairedComparison pc;
    std::uint64_t kb;
    ZTestResult z;
  };
  std::vector<Row> rows;
  std::vector<double> pvals;
  for (const auto& bname : a.b) {
    const auto pb = align_predictions(read_prediction_file(bname), labels, bname, log);
    std::vector<bool> pred_b(n);
    for (std::size_t i = 0; i < n; ++i) pred_b[i] = pb[i].pred_llm;
    const auto bb = bits(pred_b);
    const auto pc = mcnemar(std::span<const bool>(aa.get(), n), std::span<const bool>(bb.get(), n),
                            std::span<const bool>(ya.get(), n));
    const std::uint64_t kb = correct(pred_b);
    rows.push_back({bname, pc, kb, two_prop_ztest(ka, n, kb, n)});
    pvals.push_back(pc.p_value);
  }
  const auto holm = holm_correct(pvals);

  const double nd = static_cast<double>(std::max<std::size_t>(n, 1));
  ordered_json j;
  j["a"] = a.a;
  j["n"] = n;
  j["accuracy_a"] = static_cast<double>(ka) / nd;
  j["comparisons"] = ordered_json::array();
  std::ostringstream t;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %6s %6s %12s %12s %10s %8s %8s %10s %10s\n", "b", "n01", "n10",
                "p_value", "p_holm", "odds_ratio", "acc_a", "acc_b", "z", "p_z");
  t << line;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ordered_json c;
    c["b"] = r.name;
    c["n01"] = r.pc.n01;
    c["n10"] = r.pc.n10;
    c["method"] = r.pc.exact ? "exact_binomial" : "chi_square_cc";
    c["p_value"] = r.pc.p_value;
    c["p_holm"] = holm[i];
    c["odds_ratio"] = r.pc.odds_ratio_undefined ? ordered_json(nullptr) : number_or_null(r.pc.odds_ratio);
    c["odds_ratio_infinite"] = std::isinf(r.pc.odds_ratio);
    c["odds_ratio_undefined"] = r.pc.odds_ratio_undefined;
    c["accuracy_b"] = static_cast<double>(r.kb) / nd;
    c["ztest"] = {{"z", r.z.z}, {"p_value", r.z.p_value}, {"degenerate", r.z.degenerate}};
    j["comparisons"].push_back(std::move(c));

    const std::string orr = r.pc.odds_ratio_undefined ? "undef"
                            : std::isinf(r.pc.odds_ratio) ? "inf"
                                                           : fmt("%.4f", r.pc.odds_ratio);
    std::snprintf(line, sizeof line, "%-28s %6llu %6llu %12.6g %12.6g %10s %8.4f %8.4f %10.4f %10.6g\n",
                  r.name.c_str(), static_cast<unsigned long long>(r.pc.n01),
                  static_cast<unsigned long long>(r.pc.n10), r.pc.p_value, holm[i], orr.c_str(),
                  static_cast<double>(ka) / nd, static_cast<double>(r.kb) / nd, r.z.z, r.z.p_value);
    t << line;
  }
  write_text(a.out, dump(j));
  log << t.str();
  if (!a.table.empty()) write_text(a.table, t.str());
}

int fail(std::ostream& err, const char* category, const std::string& msg, int code) {
  err << "error[" << category << "]: " << msg << "\n";
  return code;
}

}  // namespace

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Human vs LLM code provenance toolkit", "provdet"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "key = value training/pipeline config");
  g.seed_opt = app.add_option("--seed", g.seed, "seed for every random choice (overrides config)");

  CurateArgs curate;
  auto* c = app.add_subcommand("curate", "filter, pair and split a raw corpus");
  c->add_option("--in", curate.in, "raw records JSONL")->required();
  c->add_option("--generated", curate.generated, "generation outcomes JSONL");
  c->add_option("--out", curate.out, "curated records JSONL")->required();
  c->add_option("--rejects", curate.rejects, "rejection report JSONL")->required();
  c->add_option("--quantile-low", curate.q_low, "lower docstring-length quantile")->capture_default_str();
  c->add_option("--quantile-high", curate.q_high, "upper docstring-length quantile")->capture_default_str();
  c->add_flag("--no-split", curate.no_split, "leave the split field unset");

  GenerateArgs gen;
  auto* ge = app.add_subcommand("generate", "request LLM implementations for human records");
  ge->add_option("--in", gen.in, "records JSONL")->required();
  ge->add_option("--out", gen.out, "outcomes JSONL")->required();
  ge->add_option("--fixture", gen.fixture, "offline id->response JSON instead of HTTP");
  ge->add_option("--prompt", gen.prompt, "docstring or signature")->capture_default_str();
  ge->add_option("--endpoint", gen.endpoint.base_url, "API base URL")->capture_default_str();
  ge->add_option("--path", gen.endpoint.path, "chat completions path")->capture_default_str();
  ge->add_option("--model", gen.endpoint.model)->capture_default_str();
  gen.temperature_opt = ge->add_option("--temperature", gen.temperature);
  gen.max_tokens_opt = ge->add_option("--max-tokens", gen.max_tokens);
  ge->add_option("--api-key-env", gen.endpoint.api_key_env, "environment variable holding the key")
      ->capture_default_str();
  ge->add_option("--max-retries", gen.endpoint.max_retries)->capture_default_str();
  ge->add_option("--backoff-ms", gen.backoff_ms, "initial retry backoff")->capture_default_str();
  ge->add_option("--rps", gen.endpoint.requests_per_second, "request rate limit, 0 for none")
      ->capture_default_str();
  ge->add_option("--parallelism", gen.endpoint.parallelism)->capture_default_str()->check(CLI::PositiveNumber);
  ge->add_option("--timeout", gen.timeout_s, "per-request timeout in seconds")->capture_default_str();

  StripArgs strip;
  auto* s = app.add_subcommand("strip-comments", "remove comments from every record");
  s->add_option("--in", strip.in)->required();
  s->add_option("--out", strip.out)->required();

  MetricsArgs metrics;
  auto* m = app.add_subcommand("metrics", "per-record code metrics and group summary");
  m->add_option("--in", metrics.in)->required();
  m->add_option("--out", metrics.out, "per-record CSV")->required();
  m->add_option("--summary", metrics.summary, "group summary JSON");

  VocabArgs voc;
  auto* v = app.add_subcommand("build-vocab", "build the token vocabulary");
  v->add_option("--in", voc.in)->required();
  v->add_option("--out", voc.out)->required();
  v->add_option("--split", voc.split, "train, valid, test or all")->capture_default_str();
  voc.max_vocab_opt = v->add_option("--max-vocab", voc.max_vocab);
  voc.comments_opt = v->add_flag("--include-comments,!--no-include-comments", voc.include_comments);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the detector");
  t->add_option("--data", tr.data, "curated JSONL with split fields");
  t->add_option("--train", tr.train_file);
  t->add_option("--valid", tr.valid_file);
  t->add_option("--vocab", tr.vocab)->required();
  t->add_option("--out", tr.out, "checkpoint directory")->required();
  t->add_option("--history", tr.history, "per-epoch CSV");
  tr.lr_opt = t->add_option("--lr", tr.lr);
  tr.lambda_opt = t->add_option("--lambda", tr.lambda, "contrastive weight");
  tr.margin_opt = t->add_option("--margin", tr.margin);
  tr.epochs_opt = t->add_option("--epochs", tr.epochs);
  tr.batch_opt = t->add_option("--batch-size", tr.batch_size);
  tr.patience_opt = t->add_option("--patience", tr.patience);

  ClassifyArgs cl;
  auto* k = app.add_subcommand("classify", "predict with a trained checkpoint");
  k->add_option("--model", cl.model, "checkpoint directory")->required();
  k->add_option("--in", cl.in)->required();
  k->add_option("--out", cl.out, "predictions JSONL")->required();
  k->add_option("--split", cl.split, "train, valid, test or all")->capture_default_str();
  cl.threshold_opt = k->add_option("--threshold", cl.threshold);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "classification metrics for a prediction file");
  e->add_option("--pred", ev.pred)->required();
  e->add_option("--labels", ev.labels, "labelled records JSONL");
  e->add_option("--out", ev.out, "report JSON")->required();
  e->add_option("--split", ev.split, "label split to score: train, valid, test or all")->capture_default_str();
  e->add_option("--table", ev.table, "text table copy");

  CompareArgs cmp;
  auto* p = app.add_subcommand("compare", "paired significance tests between prediction files");
  p->add_option("--a", cmp.a, "reference predictions")->required();
  p->add_option("--b", cmp.b, "predictions to compare, repeatable")->required();
  p->add_option("--labels", cmp.labels, "labelled records JSONL")->required();
  p->add_option("--out", cmp.out, "report JSON")->required();
  p->add_option("--split", cmp.split, "label split to compare on")->capture_default_str();
  p->add_option("--table", cmp.table, "text table copy");

  std::vector<std::string> storage{"provdet"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    return fail(err, "usage", ex.what(), kExitUsage);
  }

  try {
    if (c->parsed()) run_curate(curate, g, err);
    else if (ge->parsed()) run_generate(gen, g, err);
    else if (s->parsed()) run_strip(strip, err);
    else if (m->parsed()) run_metrics(metrics, err);
    else if (v->parsed()) run_build_vocab(voc, g, err);
    else if (t->parsed()) run_train(tr, g, err);
    else if (k->parsed()) run_classify(cl, g, err);
    else if (e->parsed()) run_evaluate(ev, err);
    else if (p->parsed()) run_compare(cmp, err);
  } catch (const ValidationError& ex) {
    return fail(err, "validation", ex.what(), kExitValidation);
  } catch (const AuthError& ex) {
    return fail(err, "auth", ex.what(), kExitIo);
  } catch (const ParseError& ex) {
    return fail(err, "parse", ex.what(), kExitIo);
  } catch (const IoError& ex) {
    return fail(err, "io", ex.what(), kExitIo);
  } catch (const Error& ex) {
    return fail(err, "io", ex.what(), kExitIo);
  } catch (const std::exception& ex) {
    return fail(err, "internal", ex.what(), kExitInternal);
  }
  return kExitOk;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace provdet::cli
