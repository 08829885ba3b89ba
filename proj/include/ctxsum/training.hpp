#ifndef CTXSUM_TRAINING_HPP
#define CTXSUM_TRAINING_HPP

#include <chrono>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "checkpoint.hpp"
#include "models.hpp"

namespace ctxsum {

struct EpochRecord {
  int epoch = 0;        // 1-based
  double train_loss = 0;
  double val_acc = 0;
  double seconds = 0;
};

struct TrainOptions {
  int max_epochs = 10;
  double clip_norm = 5.0;
  // Deterministic-artifact mode: wall-clock timings are zeroed inside the
  // checkpoint (they stay in the epoch log) so same-seed runs produce
  // bit-identical checkpoint files.
  bool deterministic_artifacts = false;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> log;
  long duplicates_dropped = 0;
};

// index of the best validation epoch; ties go to the earliest
inline int pick_best_epoch(const std::vector<double>& val_accs) {
  check(!val_accs.empty(), "pick_best_epoch: empty log");
  int best = 0;
  for (int i = 1; i < (int)val_accs.size(); ++i)
    if (val_accs[i] > val_accs[best]) best = i;
  return best;
}

// token-level accuracy of argmax predictions against targets, unmasked
// positions only
inline double token_accuracy(const std::vector<int>& argmax, const std::vector<int>& targets,
                             const std::vector<uint8_t>& mask) {
  check(argmax.size() == targets.size() && mask.size() == targets.size(), "token_accuracy: size mismatch");
  long hit = 0, total = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hit += (argmax[i] == targets[i]);
  }
  check(total > 0, "token_accuracy: no unmasked positions");
  return (double)hit / (double)total;
}

template <typename R>
std::vector<int> argmax_rows(const Tensor<R>& probs) {
  int m = probs.rows(), n = probs.cols();
  std::vector<int> out(m, 0);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    for (int j = 1; j < n; ++j)
      if (probs.at(i, j) > probs.at(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

// teacher-forced token accuracy over a list of batches
template <typename R>
double validation_accuracy(const Model<R>& model, const std::vector<Batch>& batches) {
  check(!batches.empty(), "validation_accuracy: empty validation split");
  long hit = 0, total = 0;
  for (const Batch& b : batches) {
    Tensor<R> probs = model.forward_probs(b);
    std::vector<int> am = argmax_rows(probs);
    for (size_t i = 0; i < b.dec_tgt.size(); ++i) {
      if (!b.tgt_mask[i]) continue;
      ++total;
      hit += (am[i] == b.dec_tgt[i]);
    }
  }
  check(total > 0, "validation_accuracy: no unmasked tokens");
  return (double)hit / (double)total;
}

template <typename R>
std::vector<Batch> make_batches(const Corpus& corpus, const Vocab& vocab, const HyperParams& hp,
                                std::vector<const Subroutine*> subs, Variant mode) {
  std::vector<Batch> out;
  for (size_t i = 0; i < subs.size(); i += hp.batch_size) {
    std::vector<const Subroutine*> chunk(subs.begin() + i,
                                         subs.begin() + std::min(subs.size(), i + hp.batch_size));
    out.push_back(make_batch(corpus, vocab, hp, chunk, mode));
  }
  return out;
}

// Teacher-forcing training: per epoch, shuffle the training examples
// (seeded), minimize cross entropy with Adam under global-norm clipping,
// score validation accuracy, and keep the weights of the best epoch.
inline TrainResult train(Variant variant, const Corpus& corpus, const Vocab& vocab, const HyperParams& hp,
                         const TrainOptions& opt = {}) {
  hp.validate();
  std::vector<const Subroutine*> train_subs = corpus.split_subs(Split::train);
  std::vector<const Subroutine*> val_subs = corpus.split_subs(Split::val);
  check(!train_subs.empty(), "train: empty train split");
  check(!val_subs.empty(), "train: empty val split");

  ModelConfig cfg;
  cfg.variant = variant;
  cfg.hp = hp;
  cfg.vocab_size = vocab.size();
  cfg.vocab_hash = vocab.hash();
  Model<float> model = Model<float>::init(cfg, hp.init_seed);
  AdamConfig adam;
  adam.lr = hp.lr;

  std::vector<Batch> val_batches = make_batches<float>(corpus, vocab, hp, val_subs, variant);

  TrainResult result;
  result.duplicates_dropped = corpus.duplicates_dropped;
  std::vector<std::map<std::string, Tensorf>> snapshots;
  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    auto tick = std::chrono::steady_clock::now();
    std::vector<const Subroutine*> order = train_subs;
    Rng shuffle_rng(mix_seed(hp.init_seed, 0x5e11u + (uint64_t)epoch));
    shuffle_rng.shuffle(order);
    std::vector<Batch> batches = make_batches<float>(corpus, vocab, hp, order, variant);

    double loss_sum = 0;
    long token_sum = 0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      std::map<std::string, Tensorf> grads;
      double loss = model.loss_and_grads(batches[bi], &grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(bi));
      long toks = 0;
      for (uint8_t m : batches[bi].tgt_mask) toks += (m != 0);
      loss_sum += loss * (double)toks;
      token_sum += toks;
      clip_global_norm(grads, opt.clip_norm);
      adam_update(model.store, grads, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / (double)token_sum;
    rec.val_acc = validation_accuracy(model, val_batches);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
    result.log.push_back(rec);
    snapshots.push_back(model.store.params);
  }

  std::vector<double> accs;
  for (const EpochRecord& r : result.log) accs.push_back(r.val_acc);
  int best = pick_best_epoch(accs);

  TrainMeta meta;
  meta.epoch = best + 1;
  meta.val_acc = accs[best];
  for (const EpochRecord& r : result.log)
    meta.epoch_seconds.push_back(opt.deterministic_artifacts ? 0.0 : r.seconds);
  Model<float> best_model;
  best_model.cfg = cfg;
  for (auto& [name, t] : snapshots[best]) best_model.store.add(name, t);
  result.best = Checkpoint::from_model(best_model, std::move(meta));
  return result;
}

// ---- epoch logs and cost reporting ----

// bytes of context input per example: f files x s subroutines x w words,
// each word an e-length float32 vector (the baseline carries none)
inline long context_bytes_per_example(const HyperParams& hp, Variant variant) {
  if (variant == Variant::baseline) return 0;
  long per_file = (long)hp.subs_per_file * hp.words_per_sub * hp.embed_dim * 4;
  return variant == Variant::pc ? per_file * hp.files_per_project : per_file;
}

// First line is a run header (variant, hyperparameters, parameter count,
// per-example context bytes); the following lines are the epoch records
// (epoch, train_loss, val_acc, seconds).
inline void write_epoch_log(const std::string& path, const ModelConfig& cfg, long param_count,
                            const std::vector<EpochRecord>& log) {
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "epoch log: cannot write " + path);
  nlohmann::json header = {{"run",
                            {{"variant", variant_name(cfg.variant)},
                             {"param_count", param_count},
                             {"context_bytes_per_example", context_bytes_per_example(cfg.hp, cfg.variant)},
                             {"hp", hp_to_json(cfg.hp)}}}};
  out << header.dump() << "\n";
  for (const EpochRecord& r : log)
    out << nlohmann::json{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_acc", r.val_acc},
                          {"seconds", r.seconds}}
               .dump()
        << "\n";
}

struct RunLog {
  std::string variant;
  long param_count = 0;
  long context_bytes = 0;
  HyperParams hp;
  std::vector<EpochRecord> records;
};

inline RunLog read_epoch_log(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "epoch log: cannot read " + path);
  RunLog run;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (first && j.contains("run")) {
      run.variant = j["run"].at("variant").get<std::string>();
      run.param_count = j["run"].at("param_count").get<long>();
      run.context_bytes = j["run"].at("context_bytes_per_example").get<long>();
      run.hp = hp_from_json(j["run"].at("hp"));
      first = false;
      continue;
    }
    first = false;
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.val_acc = j.at("val_acc").get<double>();
    r.seconds = j.at("seconds").get<double>();
    run.records.push_back(r);
  }
  check(!run.records.empty(), "epoch log: no epoch records in " + path);
  return run;
}

struct CostRow {
  std::string variant;
  long param_count = 0;
  double mean_minutes_per_epoch = 0;
  long context_bytes = 0;
  std::optional<double> ratio_vs_baseline;  // empty when no baseline run given
};

// RQ4-style cost table: minutes per epoch, parameter counts, context
// memory, and each run's time ratio against the baseline run if present
inline std::vector<CostRow> report_cost(const std::vector<RunLog>& runs) {
  std::vector<CostRow> rows;
  std::optional<double> baseline_minutes;
  for (const RunLog& run : runs) {
    check(!run.records.empty(), "report_cost: run has no completed epochs");
    double secs = 0;
    for (const EpochRecord& r : run.records) secs += r.seconds;
    double minutes = secs / run.records.size() / 60.0;
    if (run.variant == "baseline" && !baseline_minutes) baseline_minutes = minutes;
    CostRow row;
    row.variant = run.variant;
    row.param_count = run.param_count;
    row.mean_minutes_per_epoch = minutes;
    row.context_bytes = run.context_bytes;
    rows.push_back(row);
  }
  if (baseline_minutes && *baseline_minutes > 0)
    for (CostRow& row : rows)
      if (row.variant != "baseline") row.ratio_vs_baseline = row.mean_minutes_per_epoch / *baseline_minutes;
  return rows;
}

}  // namespace ctxsum

#endif
