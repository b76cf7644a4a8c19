// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "provdet/cli.hpp"
#include "provdet/contrastive.hpp"
#include "provdet/corpus.hpp"
#include "provdet/eval.hpp"
#include "provdet/gradcheck.hpp"
#include "provdet/lexer.hpp"
#include "provdet/metrics.hpp"
#include "provdet/rng.hpp"
#include "provdet/train.hpp"
#include "random_records.hpp"
#include "toy_corpus.hpp"

using namespace provdet;
namespace fs = std::filesystem;

namespace {

// Collects failed expectations for one criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::fabs(got - want) <= tol, s.str());
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream s;
    s << checks_ - failed_ << "/" << checks_ << " checks";
    for (const auto& f : failures_) s << "; " << f;
    return s.str();
  }
  void note(const std::string& n) { notes_ += (notes_.empty() ? "" : ", ") + n; }
  const std::string& notes() const { return notes_; }

 private:
  std::size_t checks_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
  std::string notes_;
};

double binom_cdf_half(int k, int n) {
  long double s = 0;
  for (int i = 0; i <= k; ++i) {
    s += std::exp(std::lgamma(n + 1.0L) - std::lgamma(i + 1.0L) - std::lgamma(n - i + 1.0L) - n * std::log(2.0L));
  }
  return static_cast<double>(s);
}

double pooled_z(double k1, double n1, double k2, double n2) {
  const double p = (k1 + k2) / (n1 + n2);
  return (k1 / n1 - k2 / n2) / std::sqrt(p * (1 - p) * (1 / n1 + 1 / n2));
}

// ---- 1 ------------------------------------------------------------------------------

void formula_suite(Checker& c) {
  const auto m = classification_metrics({2, 1, 4, 3});
  c.expect(m.accuracy == 0.5, "accuracy (2,1,4,3)");
  c.expect(m.precision == 2.0 / 3.0, "precision (2,1,4,3)");
  c.expect(m.recall == 1.0 / 3.0, "recall (2,1,4,3)");
  c.near(m.f1, 4.0 / 9.0, 1e-15, "f1 (2,1,4,3)");
  const auto perfect = classification_metrics({7, 0, 0, 3});
  c.expect(perfect.precision == 1 && perfect.recall == 1 && perfect.f1 == 1, "perfect case");
  const auto same = classification_metrics({3, 1, 1, 5});
  c.near(same.f1, 0.75, 1e-15, "precision = recall gives f1 = p");

  c.expect(triplet_loss(0.3, 1.5, 1) == 0, "triplet (0.3, 1.5, 1)");
  c.near(triplet_loss(0.8, 0.2, 1), 1.6, 1e-9, "triplet (0.8, 0.2, 1)");
  c.expect(triplet_loss(0, 0, 1) == 1, "triplet (0, 0, 1)");

  const std::vector<double> u{0.6, 0.8}, anti{-0.6, -0.8}, orth{0.8, -0.6};
  using S = std::span<const double>;
  c.expect(distance(S(u), S(u)) == 0, "distance identical");
  c.near(distance(S(u), S(anti)), 2.0, 1e-9, "distance antipodal");
  c.near(distance(S(u), S(orth)), std::sqrt(2.0), 1e-9, "distance orthogonal");

  const auto h = holm_correct(std::vector<double>{0.01, 0.04, 0.03});
  c.near(h[0], 0.03, 1e-9, "holm[0]");
  c.near(h[1], 0.06, 1e-9, "holm[1]");
  c.near(h[2], 0.06, 1e-9, "holm[2]");
  c.expect(holm_correct(std::vector<double>{0.2})[0] == 0.2, "holm single");
  c.expect(holm_correct(std::vector<double>{1, 1, 1}) == std::vector<double>{1, 1, 1}, "holm all ones");

  const auto eq = two_prop_ztest(30, 60, 40, 80);
  c.expect(eq.z == 0 && eq.p_value == 1, "ztest equal proportions");
  const auto big = two_prop_ztest(10, 10, 0, 10);
  c.near(big.z, pooled_z(10, 10, 0, 10), 1e-9, "ztest (10,10,0,10) z");
  c.expect(big.p_value < 0.01, "ztest (10,10,0,10) p < 0.01");
  const auto close = two_prop_ztest(109, 135, 197, 241);
  c.expect(std::fabs(close.z) < 0.5 && close.p_value > 0.5, "ztest (109,135,197,241)");
}

// ---- 2 ------------------------------------------------------------------------------

void metric_oracle(Checker& c) {
  std::ifstream in(PROVDET_FIXTURE_DIR "/metrics_oracle.json");
  c.expect(static_cast<bool>(in), "fixture readable");
  if (!in) return;
  const auto cases = nlohmann::json::parse(in);
  std::map<Language, int> per_lang;
  for (const auto& k : cases) {
    const auto lang = *parse_language(k.at("language").get<std::string>());
    ++per_lang[lang];
    const std::string code = k.at("code");
    const std::string name = k.at("name");
    c.expect(nloc(code, lang) == k.at("nloc").get<std::size_t>(), name + " nloc");
    c.expect(ccn(code, lang) == k.at("ccn").get<std::size_t>(), name + " ccn");
    c.expect(token_count(code, lang) == k.at("tc").get<std::size_t>(), name + " tc");
    c.expect(function_name_length(code, lang) == k.at("lfn").get<std::size_t>(), name + " lfn");
  }
  c.expect(per_lang[Language::Python] == 20 && per_lang[Language::Java] == 20, "20 + 20 snippets");
}

// ---- 3 ------------------------------------------------------------------------------

void gradient_suite(Checker& c) {
  EncoderConfig cfg;
  cfg.vocab_size = 24;
  cfg.embed_dim = 32;
  cfg.num_layers = 2;
  cfg.num_heads = 4;
  cfg.ff_dim = 48;
  cfg.max_len = 10;
  cfg.projector_dim = 16;
  auto p = init_params<double>(cfg, 7);
  const std::vector<Example> batch{{{kEncId, 5, 6, 7, 8, 9}, false},
                                   {{kEncId, 9, 10, 11}, true},
                                   {{kEncId, 12, 3, 3, 20, 21, 22, 23}, false},
                                   {{kEncId, 4, 17}, true}};
  GradCheckOptions opt;
  opt.coords_per_block = 24;
  const auto rep = gradient_check(p, batch, LossConfig{1.0, 1.0}, 99, opt);
  for (const auto& b : rep.blocks) {
    c.expect(b.checked >= std::min<std::size_t>(20, p.layout.block(b.name).size()), b.name + " coverage");
  }
  std::ostringstream s;
  s << "max rel error " << rep.max_rel_error() << " over " << rep.blocks.size() << " blocks";
  c.note(s.str());
  c.expect(rep.max_rel_error() <= 1e-5, s.str());
}

// ---- 4 ------------------------------------------------------------------------------

struct ToyRun {
  double test_f1 = 0;
  double within = 0, between = 0;
  std::size_t epochs = 0;
};

ToyRun toy_run(const TrainConfig& cfg, const std::vector<Example>& train_set, const std::vector<Example>& valid,
               const std::vector<Example>& test, std::size_t vocab_size) {
  const auto r = train(cfg, train_set, valid, vocab_size, [](const EpochStats& e) {
    std::fprintf(stderr, "  epoch %zu loss %.4f valid f1 %.4f\n", e.epoch, e.train_loss, e.valid_f1);
  });
  ToyRun out;
  out.epochs = r.history.epochs.size();
  out.test_f1 = classification_metrics(evaluate_examples(r.best, test).confusion).f1;
  const auto emb = embed_examples(r.best, test);
  double w = 0, b = 0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < emb[i].size(); ++k) {
        const double x = static_cast<double>(emb[i][k]) - emb[j][k];
        d += x * x;
      }
      d = std::sqrt(d);
      if (test[i].is_llm == test[j].is_llm) {
        w += d;
        ++nw;
      } else {
        b += d;
        ++nb;
      }
    }
  }
  out.within = w / static_cast<double>(nw);
  out.between = b / static_cast<double>(nb);
  return out;
}

void toy_separation(Checker& c) {
  const auto records = provdet::testing::make_toy_corpus(1000, 2024);
  TrainConfig cfg;
  const auto splits = split_dataset(records, cfg.seed, cfg.split);
  std::vector<FunctionRecord> tr, va, te;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (splits[i] == Split::Train ? tr : splits[i] == Split::Valid ? va : te).push_back(records[i]);
  }
  std::vector<std::vector<std::string>> streams;
  for (const auto& r : tr) streams.push_back(token_strings(r.code, r.language, cfg.include_comments));
  const auto vocab = build_vocab(streams, cfg.max_vocab);
  const auto enc = [&](const std::vector<FunctionRecord>& rs) {
    return encode_records(rs, vocab, cfg.encoder.max_len, cfg.include_comments);
  };
  const auto train_set = enc(tr), valid = enc(va), test = enc(te);
  c.expect(records.size() == 2000, "2000 functions");
  c.expect(train_set.size() == 1600 && valid.size() == 200 && test.size() == 200, "8:1:1 split");

  const auto full = toy_run(cfg, train_set, valid, test, vocab.size());
  auto ablated_cfg = cfg;
  ablated_cfg.lambda = 0;
  const auto ablated = toy_run(ablated_cfg, train_set, valid, test, vocab.size());

  std::ostringstream s;
  s.precision(4);
  s << "F1 " << full.test_f1 << " (lambda=1, " << full.epochs << " epochs) vs " << ablated.test_f1
    << " (lambda=0); distance within " << full.within << " between " << full.between;
  c.note(s.str());
  c.expect(full.test_f1 >= 0.90, "test F1 >= 0.90");
  c.expect(full.within < full.between, "within-class distance < between-class");
  c.expect(full.test_f1 >= ablated.test_f1 - 0.01, "F1(lambda=1) >= F1(lambda=0) - 0.01");
}

// ---- 5 ------------------------------------------------------------------------------

void default_constants(Checker& c) {
  const auto cfg = load_train_config(PROVDET_CONFIG_DIR "/default.conf");
  c.expect(cfg.encoder.dropout_p == 0.1, "dropout 0.1");
  c.expect(cfg.margin == 1.0, "margin 1");
  c.expect(cfg.threshold == 0.5, "threshold 0.5");
  c.expect(cfg.learning_rate == 2e-5, "learning rate 2e-5");
  c.expect(cfg.batch_size == 8, "batch size 8");
  c.expect(cfg.max_epochs == 20, "max epochs 20");
  c.expect(cfg.split.train == 8 && cfg.split.valid == 1 && cfg.split.test == 1, "split 8:1:1");
  c.expect(kDecisionThreshold == 0.5 && decide_llm(0.5), "decision rule at 0.5");
  c.expect(format_train_config(cfg) == format_train_config(TrainConfig{}), "shipped file equals built-in defaults");
}

// ---- 6 ------------------------------------------------------------------------------

void statistics(Checker& c) {
  for (const auto& [k1, n1, k2, n2] : std::vector<std::array<int, 4>>{{109, 135, 197, 241}, {114, 135, 200, 241}}) {
    const auto r = two_prop_ztest(k1, n1, k2, n2);
    const std::string tag = "(" + std::to_string(k1) + "," + std::to_string(n1) + ") vs (" + std::to_string(k2) +
                            "," + std::to_string(n2) + ")";
    c.near(r.z, pooled_z(k1, n1, k2, n2), 1e-9, tag + " z");
    c.expect(r.p_value > 0.05, tag + " p > 0.05");
  }
  const auto mc = mcnemar_counts(15, 5);
  const double oracle = 2 * binom_cdf_half(5, 20);
  c.near(mc.p_value, oracle, 1e-6, "McNemar (15, 5) exact p");
  c.expect(mc.odds_ratio == 3.0, "McNemar (15, 5) odds ratio");
  std::ostringstream s;
  s.precision(6);
  s << "McNemar p " << mc.p_value;
  c.note(s.str());
}

// ---- 7 ------------------------------------------------------------------------------

void curation_properties(Checker& c) {
  const auto rs = provdet::testing::random_records(600, 77);
  const QuantileBounds bounds{10, 120};
  const auto first = filter_corpus(rs, bounds);
  const auto second = filter_corpus(first.retained, bounds);
  c.expect(second.retained == first.retained && second.rejected.empty(), "filter idempotence");
  c.expect(!first.retained.empty() && !first.rejected.empty(), "filter exercised both outcomes");

  Rng rng(5);
  bool order_ok = true;
  for (const auto& r : rs) {
    const auto base = apply_noise_filters(r).violated_rules;
    auto order = kAllNoiseRules;
    rng.shuffle(std::span<NoiseRule>(order));
    order_ok = order_ok && apply_noise_filters(r, {}, order).violated_rules == base;
  }
  c.expect(order_ok, "rule-order invariance");

  const auto a = split_dataset(rs, 11);
  c.expect(a == split_dataset(rs, 11), "split determinism");
  std::array<std::size_t, 3> counts{};
  for (auto s : a) ++counts[static_cast<std::size_t>(s)];
  c.expect(counts == split_sizes(rs.size()), "split partition sizes");

  bool strip_ok = true;
  for (const auto& r : rs) {
    const auto once = strip_comments(r.code, r.language);
    strip_ok = strip_ok && strip_comments(once, r.language) == once &&
               token_count(once, r.language) == token_count(r.code, r.language);
  }
  c.expect(strip_ok, "strip_comments idempotence and token-count preservation");
}

// ---- 8 ------------------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void end_to_end(Checker& c) {
  const fs::path root = fs::temp_directory_path() / "provdet_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream raw(root / "raw.jsonl", std::ios::binary);
    write_records(raw, provdet::testing::make_toy_corpus(60, 8));
    std::ofstream conf(root / "run.conf", std::ios::binary);
    conf << "learning_rate = 5e-4\nmax_epochs = 3\npatience = 2\nembed_dim = 32\nnum_layers = 1\n"
            "num_heads = 2\nff_dim = 64\nmax_len = 96\nprojector_dim = 16\n";
  }
  const auto p = [&](const std::string& run, const std::string& name) { return (root / run / name).string(); };
  for (const std::string run : {"a", "b"}) {
    fs::create_directories(root / run);
    const std::string conf = (root / "run.conf").string();
    const std::string raw = (root / "raw.jsonl").string();
    const int rc = run_cli({"--config", conf, "--seed", "31", "curate", "--in", raw, "--out", p(run, "clean.jsonl"),
                            "--rejects", p(run, "rejects.jsonl")}) |
                   run_cli({"--config", conf, "--seed", "31", "build-vocab", "--in", p(run, "clean.jsonl"), "--out",
                            p(run, "vocab.txt")}) |
                   run_cli({"--config", conf, "--seed", "31", "train", "--data", p(run, "clean.jsonl"), "--vocab",
                            p(run, "vocab.txt"), "--out", p(run, "ckpt")}) |
                   run_cli({"--config", conf, "--seed", "31", "classify", "--model", p(run, "ckpt"), "--in",
                            p(run, "clean.jsonl"), "--out", p(run, "pred.jsonl")});
    c.expect(rc == 0, "pipeline run " + run + " exit codes");
  }
  const auto pa = slurp(p("a", "pred.jsonl")), pb = slurp(p("b", "pred.jsonl"));
  c.expect(!pa.empty(), "predictions written");
  c.expect(pa == pb, "prediction files byte-identical");
  c.expect(slurp(p("a", "ckpt/tensors.bin")) == slurp(p("b", "ckpt/tensors.bin")), "checkpoints byte-identical");
  c.note(std::to_string(std::count(pa.begin(), pa.end(), '\n')) + " predictions");
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Checker&)>>> criteria = {
      {"formula suite", formula_suite},
      {"metric oracle", metric_oracle},
      {"gradient check", gradient_suite},
      {"toy separation", toy_separation},
      {"default constants", default_constants},
      {"statistics", statistics},
      {"curation properties", curation_properties},
      {"end-to-end determinism", end_to_end},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Checker c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!c.ok()) ++failed;
    std::printf("%s %zu %s (%.1fs) %s%s%s\n", c.ok() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                c.summary().c_str(), c.notes().empty() ? "" : " | ", c.notes().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
