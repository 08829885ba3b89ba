#ifndef CTXSUM_CLI_HPP
#define CTXSUM_CLI_HPP

#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "checkpoint.hpp"
#include "evaluation.hpp"
#include "ingest.hpp"
#include "training.hpp"

namespace ctxsum::cli {

namespace detail {

inline Vocab vocab_for_checkpoint(const Corpus& corpus, const ModelConfig& cfg) {
  Vocab vocab = build_vocab(corpus.split_subs(Split::train), cfg.hp.vocab_cap);
  check(vocab.hash() == cfg.vocab_hash,
        "vocab hash mismatch: checkpoint was trained on a different vocabulary than this corpus builds");
  return vocab;
}

// Members of an ensemble may be different variants with different context
// shapes, so every model gets its own batch view of each subroutine.
inline PredictionSet predict_split(const std::vector<const Model<float>*>& models, const Corpus& corpus,
                                   const Vocab& vocab, Split split, const std::string& provenance) {
  PredictionSet preds;
  preds.provenance = provenance;
  int max_len = models[0]->cfg.hp.decode_max_len;
  for (const Subroutine* sub : corpus.split_subs(split)) {
    std::vector<Batch> views;
    for (const Model<float>* m : models) views.push_back(make_batch(corpus, vocab, m->cfg.hp, {sub}, m->cfg.variant));
    std::vector<int> ids = models.size() == 1 ? decode_greedy(*models[0], views[0], max_len)
                                              : ensemble_decode(models, views, max_len);
    preds.sentences[sub->id] = indices_to_tokens(ids, vocab);
  }
  return preds;
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline void print_report_table(const EvalReport& r, std::ostream& os) {
  os << std::fixed << std::setprecision(2);
  os << "BLEU  composite " << r.bleu.composite << "  (1-4:";
  for (double p : r.bleu.precisions) os << " " << p;
  os << ")  BP " << std::setprecision(4) << r.bleu.brevity_penalty << std::setprecision(2) << "\n";
  os << "ROUGE-LCS  P " << r.rouge.precision << "  R " << r.rouge.recall << "  F1 " << r.rouge.f1 << "\n";
  for (auto& [name, aw] : r.action_words)
    os << "action words [" << name << "]  macro P " << aw.macro_precision << "  macro R " << aw.macro_recall
       << "\n";
  if (r.comparison)
    os << "comparison  wins A " << r.comparison->wins_a << "  wins B " << r.comparison->wins_b << "  ties "
       << r.comparison->ties << "\n";
  os << "confusion (gold rows x predicted cols):\n";
  int n = (int)r.confusion.labels.size();
  size_t width = 8;
  for (const std::string& l : r.confusion.labels) width = std::max(width, l.size() + 1);
  os << std::setw((int)width) << "";
  for (const std::string& l : r.confusion.labels) os << std::setw((int)width) << l;
  os << "\n";
  for (int i = 0; i < n; ++i) {
    os << std::setw((int)width) << r.confusion.labels[i];
    for (int j = 0; j < n; ++j) os << std::setw((int)width) << r.confusion.at(i, j);
    os << "\n";
  }
}

}  // namespace detail

inline int run(const std::vector<std::string>& args) {
  CLI::App app{"ctxsum: project-context neural code summarization toolkit"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_src, ingest_out;
  CLI::App* ingest = app.add_subcommand("ingest", "convert a source tree into a corpus directory");
  ingest->add_option("src-dir", ingest_src, "source tree root")->required();
  ingest->add_option("out-dir", ingest_out, "corpus output directory")->required();

  // train
  std::string train_variant = "baseline", train_corpus, train_out, train_log;
  HyperParams hp;
  int epochs = 10;
  uint64_t seed = 1;
  bool single_thread = false;
  CLI::App* train_cmd = app.add_subcommand("train", "train a summarizer variant");
  train_cmd->add_option("--variant", train_variant, "baseline|fc|pc")->required();
  train_cmd->add_option("--corpus", train_corpus, "corpus directory")->required();
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--log", train_log, "epoch log path (default <out>.log.jsonl)");
  train_cmd->add_option("--epochs", epochs, "maximum training epochs");
  train_cmd->add_option("--seed", seed, "base seed for init/shuffle/SELECT");
  train_cmd->add_option("--e", hp.embed_dim, "vector length");
  train_cmd->add_option("--v", hp.vocab_cap, "vocab size cap");
  train_cmd->add_option("--w", hp.words_per_sub, "words per subroutine");
  train_cmd->add_option("--s", hp.subs_per_file, "subroutines per file");
  train_cmd->add_option("--f", hp.files_per_project, "files per project");
  train_cmd->add_option("--decode-len", hp.decode_max_len, "decoder length");
  train_cmd->add_option("--batch", hp.batch_size, "batch size");
  train_cmd->add_option("--lr", hp.lr, "learning rate");
  train_cmd->add_flag("--single-thread", single_thread,
                      "bit-exact mode: single-threaded with timing-free checkpoints");

  // predict
  std::string pr_ckpt, pr_corpus, pr_out, pr_split = "test";
  CLI::App* predict_cmd = app.add_subcommand("predict", "greedy-decode a split with a trained checkpoint");
  predict_cmd->add_option("--ckpt", pr_ckpt)->required();
  predict_cmd->add_option("--corpus", pr_corpus)->required();
  predict_cmd->add_option("--split", pr_split, "train|val|test");
  predict_cmd->add_option("--out", pr_out, "predictions output path")->required();

  // ensemble
  std::string en_ckpts, en_corpus, en_out, en_split = "test";
  CLI::App* ensemble_cmd = app.add_subcommand("ensemble", "mean-of-distributions decoding over checkpoints");
  ensemble_cmd->add_option("--ckpts", en_ckpts, "comma-separated checkpoint paths")->required();
  ensemble_cmd->add_option("--corpus", en_corpus)->required();
  ensemble_cmd->add_option("--split", en_split, "train|val|test");
  ensemble_cmd->add_option("--out", en_out, "predictions output path")->required();

  // eval
  std::string ev_preds, ev_preds_b, ev_corpus, ev_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against the corpus references");
  eval_cmd->add_option("--preds", ev_preds)->required();
  eval_cmd->add_option("--preds-b", ev_preds_b, "second prediction set for win/tie/loss comparison");
  eval_cmd->add_option("--corpus", ev_corpus)->required();
  eval_cmd->add_option("--out", ev_out, "report JSON path")->required();

  // cost
  std::string cost_logs;
  CLI::App* cost_cmd = app.add_subcommand("cost", "RQ4-style training cost table from epoch logs");
  cost_cmd->add_option("--logs", cost_logs, "comma-separated epoch log paths")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*ingest) {
      IngestStats stats = ingest_tree(ingest_src, ingest_out);
      std::cout << "ingested " << stats.subroutines << " subroutines from " << stats.files << " files across "
                << stats.projects << " projects into " << ingest_out << "\n";
      return 0;
    }

    if (*train_cmd) {
      hp.validate();
      hp.init_seed = seed;
      hp.select_seed = mix_seed(seed, 0x5e1ec7);
      Variant variant = parse_variant(train_variant);
      Corpus corpus = load_corpus(train_corpus);
      if (corpus.duplicates_dropped > 0)
        std::cout << "dropped " << corpus.duplicates_dropped << " exact-duplicate subroutines\n";
      Vocab vocab = build_vocab(corpus.split_subs(Split::train), hp.vocab_cap);
      TrainOptions opts;
      opts.max_epochs = epochs;
      opts.deterministic_artifacts = single_thread;
      TrainResult result = train(variant, corpus, vocab, hp, opts);
      save_checkpoint(result.best, train_out);
      std::string log_path = train_log.empty() ? train_out + ".log.jsonl" : train_log;
      long params = 0;
      for (auto& [name, t] : result.best.tensors) params += t.numel();
      write_epoch_log(log_path, result.best.config, params, result.log);
      std::cout << "best epoch " << result.best.meta.epoch << " (val acc " << std::setprecision(4)
                << result.best.meta.val_acc << "), checkpoint " << train_out << ", log " << log_path << "\n";
      return 0;
    }

    auto run_predict = [&](const std::vector<std::string>& ckpt_paths, const std::string& corpus_dir,
                           const std::string& split_name_in, const std::string& out_path) {
      Corpus corpus = load_corpus(corpus_dir);
      std::vector<Checkpoint> cks;
      std::vector<Model<float>> models;
      for (const std::string& p : ckpt_paths) cks.push_back(load_checkpoint(p));
      for (const Checkpoint& ck : cks) models.push_back(ck.to_model());
      Vocab vocab = detail::vocab_for_checkpoint(corpus, models[0].cfg);
      for (const Model<float>& m : models)
        check(m.cfg.vocab_hash == models[0].cfg.vocab_hash, "ensemble: checkpoints trained on different vocabularies");
      Split split = ctxsum::detail::parse_split(split_name_in, "--split");
      std::vector<const Model<float>*> ptrs;
      for (const Model<float>& m : models) ptrs.push_back(&m);
      std::string provenance = ckpt_paths.size() == 1 ? ckpt_paths[0] : "ensemble(" + std::to_string(ckpt_paths.size()) + ")";
      PredictionSet preds = detail::predict_split(ptrs, corpus, vocab, split, provenance);
      write_predictions(out_path, preds);
      std::cout << "wrote " << preds.sentences.size() << " predictions to " << out_path << "\n";
    };

    if (*predict_cmd) {
      run_predict({pr_ckpt}, pr_corpus, pr_split, pr_out);
      return 0;
    }

    if (*ensemble_cmd) {
      std::vector<std::string> paths = detail::split_commas(en_ckpts);
      check(!paths.empty(), "ensemble: no checkpoints given");
      run_predict(paths, en_corpus, en_split, en_out);
      return 0;
    }

    if (*eval_cmd) {
      Corpus corpus = load_corpus(ev_corpus);
      PredictionSet preds = read_predictions(ev_preds);
      SentenceMap refs;
      std::set<std::string> test_ids;
      for (const Subroutine* sub : corpus.split_subs(Split::test)) {
        refs[sub->id] = sub->summary_tokens;
        test_ids.insert(sub->id);
      }
      for (auto& [id, toks] : preds.sentences)
        check(test_ids.count(id), "eval: prediction id " + id + " is not in the test split");
      std::optional<PredictionSet> preds_b;
      if (!ev_preds_b.empty()) preds_b = read_predictions(ev_preds_b);
      EvalReport report = evaluate(preds.sentences, refs, preds_b ? &preds_b->sentences : nullptr);
      std::ofstream out(ev_out, std::ios::trunc);
      check(out.good(), "eval: cannot write " + ev_out);
      out << report_to_json(report).dump(2) << "\n";
      detail::print_report_table(report, std::cout);
      std::cout << "report written to " << ev_out << "\n";
      return 0;
    }

    if (*cost_cmd) {
      std::vector<RunLog> runs;
      for (const std::string& p : detail::split_commas(cost_logs)) runs.push_back(read_epoch_log(p));
      std::vector<CostRow> rows = report_cost(runs);
      std::cout << std::left << std::setw(10) << "variant" << std::right << std::setw(12) << "params"
                << std::setw(14) << "min/epoch" << std::setw(16) << "ctx MB/example" << std::setw(14)
                << "vs baseline" << "\n";
      for (const CostRow& r : rows) {
        std::cout << std::left << std::setw(10) << r.variant << std::right << std::setw(12) << r.param_count
                  << std::setw(14) << std::fixed << std::setprecision(4) << r.mean_minutes_per_epoch
                  << std::setw(16) << std::setprecision(3) << (double)r.context_bytes / 1e6;
        if (r.ratio_vs_baseline)
          std::cout << std::setw(13) << std::setprecision(2) << *r.ratio_vs_baseline << "x";
        else
          std::cout << std::setw(14) << "";
        std::cout << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "ctxsum: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
  return run(args);
}

}  // namespace ctxsum::cli

#endif
