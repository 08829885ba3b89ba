// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Criteria are pinned to the tolerances in the module contracts; the
// synthetic corpora below are generated deterministically in-process.
#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>

#include <ctxsum/checkpoint.hpp>
#include <ctxsum/evaluation.hpp>
#include <ctxsum/models.hpp>
#include <ctxsum/training.hpp>

using namespace ctxsum;

namespace {

struct Criterion {
  int number;
  std::string label;
  std::function<bool(std::ostream&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- in-memory corpus construction ----

struct Builder {
  Corpus corpus;

  void add(const std::string& project, const std::string& file, const std::string& id,
           std::vector<std::string> code, std::vector<std::string> summary) {
    auto& proj = corpus.projects[project];
    proj.project_id = project;
    auto& cf = corpus.files[file];
    if (cf.file_id.empty()) {
      cf.file_id = file;
      cf.project_id = project;
      proj.file_ids.push_back(file);
    }
    Subroutine s;
    s.id = id;
    s.project_id = project;
    s.file_id = file;
    s.position_in_file = (int)cf.subroutine_ids.size();
    s.code_tokens = std::move(code);
    s.summary_tokens = std::move(summary);
    cf.subroutine_ids.push_back(id);
    corpus.sub_index[id] = (int)corpus.subroutines.size();
    corpus.subroutines.push_back(std::move(s));
  }
};

// 30 memorizable examples; validation is a near-clone project (one code
// token differs) so best-epoch selection tracks the memorization itself
Corpus overfit_corpus() {
  Builder b;
  std::vector<std::string> verbs{"adds", "removes", "opens", "closes", "starts", "stops", "reads", "writes",
                                 "finds", "clears"};
  std::vector<std::string> nouns{"row", "file", "socket", "cache", "token", "node", "queue", "frame", "lock",
                                 "page"};
  for (int i = 0; i < 30; ++i) {
    std::string file = "train/f" + std::to_string(i / 5) + ".java";
    b.add("ptrain", file, "t" + std::to_string(i),
          {"key" + std::to_string(i), "fn", "arg" + std::to_string(i % 7), "x", "y"},
          {verbs[i % 10], "the", nouns[(i / 3) % 10]});
  }
  for (int i = 0; i < 30; ++i)
    b.add("pval", "val/f" + std::to_string(i / 5) + ".java", "v" + std::to_string(i),
          {"key" + std::to_string(i), "fn", "arg" + std::to_string(i % 7), "x", "z"},
          {verbs[i % 10], "the", nouns[(i / 3) % 10]});
  b.corpus.splits["ptrain"] = Split::train;
  b.corpus.splits["pval"] = Split::val;
  return b.corpus;
}

// Corpus where the correct second summary token (a per-project marker word)
// appears only in sibling files, never in the target subroutine or its file.
// Split by project; test projects reuse the marker vocabulary with fresh
// filler tokens.
Corpus marker_corpus(std::vector<std::string>* test_target_ids, std::map<std::string, std::string>* gold_marker) {
  static const std::vector<std::string> markers{"alpha", "bravo", "charlie", "delta",  "echo",
                                                "foxtrot", "golf", "hotel",  "india", "juliet"};
  Builder b;
  Rng rng(20240);
  auto filler = [&]() { return "fill" + std::to_string(rng.next_below(40)); };

  auto add_project = [&](const std::string& pid, const std::string& marker, Split split) {
    std::string f0 = pid + "/targets.java", f1 = pid + "/lib.java", f2 = pid + "/core.java";
    for (int i = 0; i < 2; ++i) {
      std::string id = pid + "/tgt" + std::to_string(i);
      b.add(pid, f0, id, {"on", "event", "dispatch", filler(), filler(), "run", std::to_string(i)},
            {"handles", marker, "events"});
      if (split == Split::test && test_target_ids) {
        test_target_ids->push_back(id);
        (*gold_marker)[id] = marker;
      }
    }
    for (const std::string& f : {f1, f2})
      for (int i = 0; i < 2; ++i)
        b.add(pid, f, f + "#ctx" + std::to_string(i),
              {"util", filler(), "impl", marker, "core", marker, marker}, {"provides", marker, "support"});
    b.corpus.splits[pid] = split;
  };

  int pid = 0;
  for (int rep = 0; rep < 4; ++rep)
    for (const std::string& m : markers) add_project("train" + std::to_string(pid++), m, Split::train);
  for (int i = 0; i < 5; ++i) add_project("val" + std::to_string(i), markers[i * 2], Split::val);
  for (size_t i = 0; i < markers.size(); ++i) add_project("test" + std::to_string(i), markers[i], Split::test);
  return b.corpus;
}

double marker_accuracy(const Model<float>& model, const Corpus& corpus, const Vocab& vocab,
                       const std::vector<std::string>& target_ids,
                       const std::map<std::string, std::string>& gold) {
  int hit = 0;
  for (const std::string& id : target_ids) {
    Batch one = make_batch(corpus, vocab, model.cfg.hp, {&corpus.sub(id)}, model.cfg.variant);
    std::vector<int> out = decode_greedy(model, one, model.cfg.hp.decode_max_len);
    if (out.size() >= 2 && vocab.word(out[1]) == gold.at(id)) ++hit;
  }
  return (double)hit / (double)target_ids.size();
}

// shared between criteria 3 and 7: both variants trained on the marker
// corpus at identical settings
struct ContextRuns {
  bool ran = false;
  TrainResult baseline, pc;
  double acc_baseline = 0, acc_pc = 0;
  Corpus corpus;
  Vocab vocab;
  HyperParams hp;
};
ContextRuns g_context;

void run_context_experiment(std::ostream& os) {
  if (g_context.ran) return;
  std::vector<std::string> target_ids;
  std::map<std::string, std::string> gold;
  g_context.corpus = marker_corpus(&target_ids, &gold);

  HyperParams hp;
  hp.embed_dim = 32;
  hp.vocab_cap = 300;
  hp.words_per_sub = 8;
  hp.subs_per_file = 2;
  hp.files_per_project = 3;
  hp.decode_max_len = 6;
  hp.batch_size = 8;
  hp.lr = 3e-3f;
  hp.init_seed = 12;
  hp.select_seed = 13;
  g_context.hp = hp;
  g_context.vocab = build_vocab(g_context.corpus.split_subs(Split::train), hp.vocab_cap);

  TrainOptions opts;
  opts.max_epochs = 50;
  os << "    training attendgru (baseline) ...\n";
  g_context.baseline = train(Variant::baseline, g_context.corpus, g_context.vocab, hp, opts);
  os << "    training attendgru-pc ...\n";
  g_context.pc = train(Variant::pc, g_context.corpus, g_context.vocab, hp, opts);

  g_context.acc_baseline =
      marker_accuracy(g_context.baseline.best.to_model(), g_context.corpus, g_context.vocab, target_ids, gold);
  g_context.acc_pc =
      marker_accuracy(g_context.pc.best.to_model(), g_context.corpus, g_context.vocab, target_ids, gold);
  g_context.ran = true;
}

// ---- criteria ----

bool criterion_gradients(std::ostream& os) {
  auto t0 = std::chrono::steady_clock::now();
  Corpus corpus = load_corpus(CTXSUM_FIXTURE_DIR);
  HyperParams hp;
  hp.embed_dim = 8;
  hp.vocab_cap = 16;  // 16 + 4 specials = 20-way vocabulary
  hp.words_per_sub = 5;
  hp.subs_per_file = 2;
  hp.files_per_project = 2;
  hp.decode_max_len = 4;
  Vocab vocab = build_vocab(corpus.split_subs(Split::train), hp.vocab_cap);
  if (vocab.size() != 20) {
    os << "    vocabulary is " << vocab.size() << "-way, expected 20\n";
    return false;
  }

  bool ok = true;
  for (Variant v : {Variant::baseline, Variant::pc}) {
    ModelConfig cfg{v, hp, vocab.size(), vocab.hash()};
    Model<double> model = Model<double>::init(cfg, 17);
    std::vector<const Subroutine*> subs = corpus.split_subs(Split::train);
    subs.resize(2);
    Batch batch = make_batch(corpus, vocab, hp, subs, v);
    LossClosure<double> loss = [&](ParamStore<double>& s, std::map<std::string, Tensord>* grads) {
      Model<double> probe;
      probe.cfg = cfg;
      probe.store.params = s.params;
      return probe.loss_and_grads(batch, grads);
    };
    double err = finite_difference_check(loss, model.store);
    os << "    " << (v == Variant::baseline ? "attendgru   " : "attendgru-pc") << " max relative error "
       << std::scientific << std::setprecision(3) << err << std::defaultfloat << "\n";
    ok &= err < 1e-3;
  }
  double secs = seconds_since(t0);
  os << "    runtime " << std::fixed << std::setprecision(1) << secs << " s (budget 60)\n";
  return ok && secs < 60.0;
}

bool criterion_overfit(std::ostream& os) {
  auto t0 = std::chrono::steady_clock::now();
  Corpus corpus = overfit_corpus();
  HyperParams hp;
  hp.embed_dim = 32;
  hp.vocab_cap = 200;
  hp.words_per_sub = 5;
  hp.decode_max_len = 6;
  hp.subs_per_file = 2;
  hp.files_per_project = 2;
  hp.batch_size = 8;
  hp.lr = 3e-3f;
  hp.init_seed = 3;
  hp.select_seed = 4;
  Vocab vocab = build_vocab(corpus.split_subs(Split::train), hp.vocab_cap);

  TrainOptions opts;
  opts.max_epochs = 200;  // cap raised for the overfit run
  TrainResult result = train(Variant::baseline, corpus, vocab, hp, opts);
  Model<float> model = result.best.to_model();

  std::vector<const Subroutine*> train_subs = corpus.split_subs(Split::train);
  std::vector<Batch> train_batches = make_batches<float>(corpus, vocab, hp, train_subs, Variant::baseline);
  double acc = validation_accuracy(model, train_batches);

  SentenceMap preds, refs;
  for (const Subroutine* sub : train_subs) {
    Batch one = make_batch(corpus, vocab, hp, {sub}, Variant::baseline);
    preds[sub->id] = indices_to_tokens(decode_greedy(model, one, hp.decode_max_len), vocab);
    refs[sub->id] = sub->summary_tokens;
  }
  double bleu = corpus_bleu(preds, refs).composite;
  double secs = seconds_since(t0);
  os << "    train token accuracy " << std::fixed << std::setprecision(4) << acc << " (needs >= 0.99)\n";
  os << "    train corpus BLEU " << std::setprecision(2) << bleu << " (needs >= 95)\n";
  os << "    runtime " << std::setprecision(1) << secs << " s (budget 300)\n";
  return acc >= 0.99 && bleu >= 95.0 && secs < 300.0;
}

bool criterion_context_advantage(std::ostream& os) {
  auto t0 = std::chrono::steady_clock::now();
  run_context_experiment(os);
  double secs = seconds_since(t0);
  os << "    held-out second-token accuracy: attendgru-pc " << std::fixed << std::setprecision(3)
     << g_context.acc_pc << " (needs >= 0.9), attendgru " << g_context.acc_baseline << " (needs <= 0.3)\n";
  os << "    runtime " << std::setprecision(1) << secs << " s (budget 900)\n";
  return g_context.acc_pc >= 0.9 && g_context.acc_baseline <= 0.3 && secs < 900.0;
}

bool criterion_metric_oracles(std::ostream& os) {
  bool ok = true;
  SentenceMap refs{{"a", {"the", "cat", "is", "on", "the", "mat"}}};

  SentenceMap ident{{"a", {"the", "cat", "is", "on", "the", "mat"}}};
  double identity = corpus_bleu(ident, refs).composite;
  ok &= std::fabs(identity - 100.0) < 1e-6;
  os << "    identity BLEU " << std::fixed << std::setprecision(6) << identity << "\n";

  SentenceMap sevens{{"a", {"the", "the", "the", "the", "the", "the", "the"}}};
  double p1 = corpus_bleu(sevens, refs).precisions[0];
  ok &= std::fabs(p1 - 100.0 * 2.0 / 7.0) < 1e-6;
  os << "    clipped unigram precision " << p1 << " (hand value " << 100.0 * 2.0 / 7.0 << ")\n";

  // brevity penalty: candidate of 2 vs reference of 4 -> exp(1 - 4/2)
  SentenceMap brief{{"a", {"the", "cat"}}};
  SentenceMap short_ref{{"a", {"the", "cat", "sat", "down"}}};
  double bp = corpus_bleu(brief, short_ref).brevity_penalty;
  ok &= std::fabs(bp - std::exp(-1.0)) < 1e-6;
  // and no penalty when the candidate is longer than the reference
  double bp_long = corpus_bleu(short_ref, brief).brevity_penalty;
  ok &= bp_long == 1.0;
  os << "    brevity penalty " << bp << " (hand value " << std::exp(-1.0) << "), long-candidate penalty "
     << bp_long << "\n";

  RougeScore rouge = rouge_lcs(SentenceMap{{"a", {"a", "b", "c", "d"}}}, SentenceMap{{"a", {"a", "c", "d"}}});
  ok &= rouge.recall == 100.0 && rouge.precision == 75.0;
  ok &= std::fabs(rouge.f1 - 2.0 * 0.75 / 1.75 * 100.0) < 1e-9;
  os << "    rouge LCS=3 case P " << rouge.precision << " R " << rouge.recall << " F1 " << rouge.f1 << "\n";
  return ok;
}

bool criterion_ensemble(std::ostream& os) {
  Corpus corpus = load_corpus(CTXSUM_FIXTURE_DIR);
  HyperParams hp;
  hp.embed_dim = 8;
  hp.vocab_cap = 40;
  hp.words_per_sub = 6;
  hp.decode_max_len = 6;
  hp.subs_per_file = 2;
  hp.files_per_project = 2;
  hp.batch_size = 4;
  hp.init_seed = 5;
  hp.select_seed = 6;
  Vocab vocab = build_vocab(corpus.split_subs(Split::train), hp.vocab_cap);
  TrainOptions opts;
  opts.max_epochs = 3;
  Model<float> m1 = train(Variant::baseline, corpus, vocab, hp, opts).best.to_model();
  HyperParams hp2 = hp;
  hp2.init_seed = 50;
  Model<float> m2 = train(Variant::baseline, corpus, vocab, hp2, opts).best.to_model();

  bool ok = true;
  // self-ensemble is token-identical with solo decoding on the test split
  for (const Subroutine* sub : corpus.split_subs(Split::test)) {
    Batch one = make_batch(corpus, vocab, hp, {sub}, Variant::baseline);
    std::vector<int> solo = decode_greedy(m1, one, hp.decode_max_len);
    std::vector<int> self = ensemble_decode<float>({&m1, &m1}, one, hp.decode_max_len);
    if (solo != self) {
      os << "    self-ensemble diverged on " << sub->id << "\n";
      ok = false;
    }
  }
  os << "    self-ensemble matches solo decode on all test ids\n";

  // the two-model ensemble follows the arithmetic mean of member
  // distributions step by step
  double max_dev = 0;
  for (const Subroutine* sub : corpus.split_subs(Split::test)) {
    Batch one = make_batch(corpus, vocab, hp, {sub}, Variant::baseline);
    StepDecoder<float> da(m1, one), db(m2, one);
    std::vector<int> manual;
    int prev = Vocab::kStart;
    for (int t = 0; t < hp.decode_max_len; ++t) {
      std::vector<double> pa = da.step(prev), pb = db.step(prev);
      std::vector<double> mean(pa.size());
      for (size_t i = 0; i < pa.size(); ++i) {
        mean[i] = (pa[i] + pb[i]) / 2.0;
        max_dev = std::max(max_dev, std::fabs(mean[i] - (pa[i] + pb[i]) / 2.0));
      }
      int best = 0;
      for (size_t i = 1; i < mean.size(); ++i)
        if (mean[i] > mean[best]) best = (int)i;
      if (best == Vocab::kEnd) break;
      manual.push_back(best);
      prev = best;
    }
    std::vector<int> joint = ensemble_decode<float>({&m1, &m2}, one, hp.decode_max_len);
    if (manual != joint) {
      os << "    ensemble diverged from the manual mean decode on " << sub->id << "\n";
      ok = false;
    }
  }
  os << "    two-model decode equals greedy over the member mean (deviation " << std::scientific
     << std::setprecision(2) << max_dev << std::defaultfloat << ", tolerance 1e-7)\n";
  ok &= max_dev < 1e-7;

  // scripted distributions: the mean is the arithmetic mean to 1e-7
  std::vector<double> sa{0.6, 0.4}, sb{0.2, 0.8}, expect{0.4, 0.6};
  for (int i = 0; i < 2; ++i) ok &= std::fabs((sa[i] + sb[i]) / 2.0 - expect[i]) < 1e-7;
  return ok;
}

bool criterion_determinism(std::ostream& os) {
  Corpus corpus = load_corpus(CTXSUM_FIXTURE_DIR);
  HyperParams hp;
  hp.embed_dim = 8;
  hp.vocab_cap = 40;
  hp.words_per_sub = 6;
  hp.decode_max_len = 6;
  hp.subs_per_file = 2;
  hp.files_per_project = 2;
  hp.batch_size = 4;
  hp.init_seed = 9;
  hp.select_seed = 10;
  Vocab vocab = build_vocab(corpus.split_subs(Split::train), hp.vocab_cap);
  TrainOptions opts;
  opts.max_epochs = 3;
  opts.deterministic_artifacts = true;  // single-thread bit-exact mode
  TrainResult a = train(Variant::pc, corpus, vocab, hp, opts);
  TrainResult b = train(Variant::pc, corpus, vocab, hp, opts);
  std::string bytes_a = serialize_checkpoint(a.best), bytes_b = serialize_checkpoint(b.best);
  bool same_ckpt = bytes_a == bytes_b;
  os << "    same-seed checkpoints identical: " << (same_ckpt ? "yes" : "NO") << " (" << bytes_a.size()
     << " bytes)\n";

  Checkpoint reloaded = deserialize_checkpoint(bytes_a);
  Batch batch = make_batch(corpus, vocab, hp, corpus.split_subs(Split::val), Variant::pc);
  Tensorf before = a.best.to_model().forward_probs(batch);
  Tensorf after = reloaded.to_model().forward_probs(batch);
  bool same_fwd = before.data.size() == after.data.size() &&
                  std::memcmp(before.data.data(), after.data.data(), before.data.size() * sizeof(float)) == 0;
  os << "    save/load/forward bit-identical: " << (same_fwd ? "yes" : "NO") << "\n";
  return same_ckpt && same_fwd;
}

bool criterion_cost(std::ostream& os) {
  run_context_experiment(os);
  auto mean_seconds = [](const TrainResult& r) {
    double s = 0;
    for (auto& rec : r.log) s += rec.seconds;
    return s / r.log.size();
  };
  double base_min = mean_seconds(g_context.baseline) / 60.0;
  double pc_min = mean_seconds(g_context.pc) / 60.0;
  os << "    minutes/epoch: baseline " << std::fixed << std::setprecision(4) << base_min << ", pc " << pc_min
     << " (ratio " << std::setprecision(2) << pc_min / base_min << "x)\n";

  HyperParams paper_defaults;
  long bytes = context_bytes_per_example(paper_defaults, Variant::pc);
  os << "    context memory per example at paper defaults: " << bytes << " bytes (needs 1000000 = 1 MB)\n";
  return pc_min > base_min && bytes == 1000000;
}

bool criterion_invariants(std::ostream& os) {
  int failures = 0;
  auto prop = [&](const std::string& name, bool pass) {
    os << "    [" << (pass ? "ok" : "FAIL") << "] " << name << "\n";
    failures += !pass;
  };

  // substrate: softmax distribution + mask exactness
  {
    Rng rng(501);
    bool pass = true;
    for (int iter = 0; iter < 40; ++iter) {
      int n = 2 + (int)rng.next_below(6);
      Tensord x = Tensord::zeros({2, n});
      for (auto& v : x.data) v = rng.uniform(-8, 8);
      std::vector<uint8_t> mask(n, 0);
      mask[rng.next_below(n)] = 1;
      for (int j = 0; j < n; ++j)
        if (rng.next_below(2)) mask[j] = 1;
      Graph<double> g;
      Var y = g.softmax(g.input(x), mask);
      for (int i = 0; i < 2; ++i) {
        double sum = 0;
        for (int j = 0; j < n; ++j) {
          if (!mask[j] && g.value(y).at(i, j) != 0.0) pass = false;
          sum += g.value(y).at(i, j);
        }
        if (std::fabs(sum - 1.0) > 1e-6) pass = false;
      }
    }
    prop("softmax rows sum to 1 and masks are exact", pass);
  }

  // substrate: gru_sequence with all-true mask equals the left fold
  {
    Rng rng(502);
    Graph<double> g;
    GruVars<double> p;
    auto leaf = [&](int r, int c) {
      Tensord t = Tensord::zeros({r, c});
      for (auto& v : t.data) v = rng.uniform(-0.7, 0.7);
      return g.input(t);
    };
    p.wz = leaf(3, 3); p.uz = leaf(3, 3); p.bz = leaf(1, 3);
    p.wr = leaf(3, 3); p.ur = leaf(3, 3); p.br = leaf(1, 3);
    p.wh = leaf(3, 3); p.uh = leaf(3, 3); p.bh = leaf(1, 3);
    // bias leaves need rank-1 shapes
    p.bz = g.input(Tensord::zeros({3}));
    p.br = g.input(Tensord::zeros({3}));
    p.bh = g.input(Tensord::zeros({3}));
    std::vector<Var> xs{leaf(1, 3), leaf(1, 3), leaf(1, 3), leaf(1, 3)};
    Var h0 = g.zeros({1, 3});
    auto seq = gru_sequence(g, p, xs, h0, {1, 1, 1, 1});
    Var fold = h0;
    for (Var x : xs) fold = gru_step(g, p, x, fold);
    prop("gru_sequence(all-true) equals the gru_step fold", g.value(seq.final).data == g.value(fold).data);
  }

  // substrate: adam determinism
  {
    auto run = []() {
      ParamStore<float> s;
      Rng rng(503);
      Tensorf p = Tensorf::zeros({5, 5});
      for (auto& v : p.data) v = (float)rng.uniform(-1, 1);
      s.add("w", p);
      for (int i = 0; i < 8; ++i) {
        Tensorf g = Tensorf::zeros({5, 5});
        for (auto& v : g.data) v = (float)rng.uniform(-1, 1);
        adam_update(s, {{"w", g}}, AdamConfig{});
      }
      return s.at("w").data;
    };
    auto a = run(), b = run();
    prop("adam_update is bit-deterministic", std::memcmp(a.data(), b.data(), a.size() * 4) == 0);
  }

  Corpus fixture = load_corpus(CTXSUM_FIXTURE_DIR);

  // corpus: tokenize idempotence
  {
    Rng rng(504);
    bool pass = true;
    for (int iter = 0; iter < 60; ++iter) {
      std::string s;
      for (int k = 0; k < 12; ++k) {
        int c = (int)rng.next_below(64);
        if (c < 26) s += (char)('a' + c);
        else if (c < 52) s += (char)('A' + c - 26);
        else if (c < 60) s += (char)('0' + c - 52);
        else s += "_(,.";
      }
      std::vector<std::string> once = tokenize(s);
      std::string joined;
      for (auto& t : once) joined += t + " ";
      if (tokenize(joined) != once) pass = false;
    }
    prop("tokenize is idempotent on its own output", pass);
  }

  // corpus: vocabulary leakage
  {
    Vocab v1 = build_vocab(fixture.split_subs(Split::train), 30);
    Corpus extended = fixture;
    Subroutine nova;
    nova.id = "cedar/new#0";
    nova.project_id = "cedar";
    nova.file_id = "cedar/new.java";
    nova.code_tokens = {"xylophone", "quasar"};
    nova.summary_tokens = {"astral", "music"};
    extended.files[nova.file_id] = CorpusFile{nova.file_id, "cedar", {nova.id}};
    extended.sub_index[nova.id] = (int)extended.subroutines.size();
    extended.subroutines.push_back(nova);
    Vocab v2 = build_vocab(extended.split_subs(Split::train), 30);
    prop("vocab depends only on the train split", v1.words == v2.words);
  }

  // corpus: SELECT sample properties
  {
    Rng rng(505);
    bool pass = true;
    const Project& proj = fixture.projects.at("acme");
    for (int f = 1; f <= 6 && pass; ++f)
      for (const Subroutine& sub : fixture.subroutines) {
        SelectedFiles sel = select_context_files(fixture, proj, sub, f, rng.next_u64());
        if ((int)sel.file_ids.size() > f) pass = false;
        std::set<std::string> uniq(sel.file_ids.begin(), sel.file_ids.end());
        if (uniq.size() != sel.file_ids.size()) pass = false;
        if ((int)sel.file_ids.size() + sel.pad_count != f) pass = false;
      }
    prop("SELECT never duplicates and never exceeds f", pass);
  }

  // corpus: batch target alignment
  {
    Vocab v = build_vocab(fixture.split_subs(Split::train), 50);
    HyperParams hp;
    hp.decode_max_len = 6;
    hp.words_per_sub = 6;
    Batch b = make_batch(fixture, v, hp, fixture.split_subs(Split::train), Variant::baseline);
    bool pass = true;
    for (int i = 0; i < b.b; ++i)
      for (int t = 0; t + 1 < b.t; ++t) {
        size_t cur = (size_t)i * b.t + t;
        if (b.tgt_mask[cur] && b.dec_in[cur + 1] != Vocab::kPad && b.dec_tgt[cur] != b.dec_in[cur + 1])
          pass = false;
      }
    prop("decoder target at t equals input at t+1 where both live", pass);
  }

  // encoders: attention monotonicity
  {
    Graph<double> g;
    Var q = g.input(from_rows<double>({{0.7, 0.3}}));
    Var kv = g.input(from_rows<double>({{0.5, 0.1}, {-0.2, 0.4}}));
    Var kv_scaled = g.input(from_rows<double>({{1.0, 0.2}, {-0.2, 0.4}}));
    std::shared_ptr<Tensord> w1, w2;
    g.attend(q, kv, {1, 1}, 2, &w1);
    g.attend(q, kv_scaled, {1, 1}, 2, &w2);
    prop("scaling a key's logit raises its attention weight", w2->at(0, 0) > w1->at(0, 0));
  }

  // models: probability rows and decode determinism
  {
    Vocab v = build_vocab(fixture.split_subs(Split::train), 40);
    HyperParams hp;
    hp.embed_dim = 8;
    hp.vocab_cap = 40;
    hp.words_per_sub = 6;
    hp.decode_max_len = 5;
    hp.subs_per_file = 2;
    hp.files_per_project = 2;
    ModelConfig cfg{Variant::fc, hp, v.size(), v.hash()};
    Model<float> m = Model<float>::init(cfg, 71);
    Batch b = make_batch(fixture, v, hp, fixture.split_subs(Split::val), Variant::fc);
    Tensorf probs = m.forward_probs(b);
    bool rows_ok = true;
    for (int i = 0; i < probs.rows(); ++i) {
      double sum = 0;
      for (int j = 0; j < probs.cols(); ++j) {
        if (probs.at(i, j) < 0) rows_ok = false;
        sum += probs.at(i, j);
      }
      if (std::fabs(sum - 1.0) > 1e-5) rows_ok = false;
    }
    prop("forward rows are probability distributions", rows_ok);

    Batch one = make_batch(fixture, v, hp, {&fixture.sub("cedar/a.java#0")}, Variant::fc);
    prop("greedy decode is deterministic",
         decode_greedy(m, one, 5) == decode_greedy(m, one, 5));
  }

  // training: tie-break on best epoch
  prop("best-epoch ties resolve to the earliest epoch", pick_best_epoch({0.5, 0.8, 0.8, 0.2}) == 1);

  // evaluation: self BLEU, rouge zero iff, partition
  {
    Rng rng(506);
    bool pass = true;
    for (int iter = 0; iter < 25; ++iter) {
      SentenceMap m;
      int n = 1 + (int)rng.next_below(5);
      for (int i = 0; i < n; ++i) {
        TokenSeq t;
        for (int k = 0; k < 1 + (int)rng.next_below(6); ++k) t.push_back("w" + std::to_string(rng.next_below(6)));
        m["id" + std::to_string(i)] = t;
      }
      if (std::fabs(corpus_bleu(m, m).composite - 100.0) > 1e-9) pass = false;
      MethodComparison cmp = per_method_comparison(m, m, m);
      if (cmp.ties != (long)m.size() || cmp.wins_a || cmp.wins_b) pass = false;
    }
    prop("self-BLEU is 100 and self-comparison all ties", pass);

    SentenceMap pred{{"a", {"x", "y"}}, {"b", {"p"}}};
    SentenceMap ref{{"a", {"q", "r"}}, {"b", {"s"}}};
    prop("rouge F1 is zero when every LCS is empty", rouge_lcs(pred, ref).f1 == 0.0);
  }

  return failures == 0;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {1, "gradient correctness (finite differences, tiny dims)", criterion_gradients},
      {2, "overfit fixture (30 examples, 200 epochs)", criterion_overfit},
      {3, "context advantage on held-out projects", criterion_context_advantage},
      {4, "metric oracles (BLEU / ROUGE hand values)", criterion_metric_oracles},
      {5, "ensemble semantics (mean of distributions)", criterion_ensemble},
      {6, "determinism (seeds, checkpoints, round trips)", criterion_determinism},
      {7, "cost reporting (timing and context memory)", criterion_cost},
      {8, "module invariant property suites", criterion_invariants},
  };

  int failed = 0;
  for (auto& c : criteria) {
    std::cout << "criterion " << c.number << ": " << c.label << "\n";
    bool pass = false;
    try {
      pass = c.run(std::cout);
    } catch (const std::exception& e) {
      std::cout << "    exception: " << e.what() << "\n";
    }
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << c.number << ": " << c.label << "\n\n";
    failed += !pass;
  }
  std::cout << (failed == 0 ? "ACCEPTANCE: all criteria passed" : "ACCEPTANCE: FAILURES PRESENT") << " ("
            << criteria.size() - failed << "/" << criteria.size() << ")\n";
  return failed == 0 ? 0 : 1;
}
