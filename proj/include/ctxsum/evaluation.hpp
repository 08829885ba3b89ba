#ifndef CTXSUM_EVALUATION_HPP
#define CTXSUM_EVALUATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tensor.hpp"

namespace ctxsum {

using TokenSeq = std::vector<std::string>;
using SentenceMap = std::map<std::string, TokenSeq>;  // id -> tokens, ordered

struct PredictionSet {
  SentenceMap sentences;
  std::string provenance;  // model or ensemble name
};

namespace detail {

// n-gram multiset keyed by joined tokens (separator never occurs in tokens)
inline std::unordered_map<std::string, long> ngram_counts(const TokenSeq& toks, int n) {
  std::unordered_map<std::string, long> out;
  if ((int)toks.size() < n) return out;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      key += toks[i + j];
      key += '\x1f';
    }
    out[key]++;
  }
  return out;
}

inline long clipped_matches(const TokenSeq& cand, const TokenSeq& ref, int n, long* total) {
  auto cc = ngram_counts(cand, n);
  auto rc = ngram_counts(ref, n);
  long clipped = 0, tot = 0;
  for (auto& [key, cnt] : cc) {
    tot += cnt;
    auto it = rc.find(key);
    if (it != rc.end()) clipped += std::min(cnt, it->second);
  }
  if (total) *total = tot;
  return clipped;
}

inline long lcs_length(const TokenSeq& a, const TokenSeq& b) {
  size_t n = a.size(), m = b.size();
  std::vector<long> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace detail

struct BleuScore {
  double composite = 0;              // x100
  std::array<double, 4> precisions{};  // modified n-gram precisions, x100
  double brevity_penalty = 1.0;
  long candidate_len = 0, reference_len = 0;
};

// Corpus-level BLEU-4 per Papineni: geometric mean of clipped modified
// n-gram precisions with brevity penalty, no smoothing. Short sentences
// contribute whatever n-grams they have.
inline BleuScore corpus_bleu(const SentenceMap& predictions, const SentenceMap& references) {
  check(!predictions.empty(), "corpus_bleu: empty prediction set");
  long clipped[4] = {0, 0, 0, 0}, totals[4] = {0, 0, 0, 0};
  BleuScore score;
  for (auto& [id, cand] : predictions) {
    auto it = references.find(id);
    check(it != references.end(), "corpus_bleu: no reference for id " + id);
    const TokenSeq& ref = it->second;
    score.candidate_len += (long)cand.size();
    score.reference_len += (long)ref.size();
    for (int n = 1; n <= 4; ++n) {
      long tot = 0;
      clipped[n - 1] += detail::clipped_matches(cand, ref, n, &tot);
      totals[n - 1] += tot;
    }
  }
  // orders with an empty candidate pool (every sentence shorter than n) are
  // excluded from the geometric mean, so identity stays at 100 even for
  // all-short corpora; an order with candidates but zero matches still
  // zeroes the composite
  int orders = 0;
  for (int n = 0; n < 4; ++n) orders += (totals[n] > 0);
  double logsum = 0;
  bool zero = orders == 0;
  for (int n = 0; n < 4; ++n) {
    double p = totals[n] > 0 ? (double)clipped[n] / (double)totals[n] : 0.0;
    score.precisions[n] = p * 100.0;
    if (totals[n] == 0) continue;
    if (p <= 0)
      zero = true;
    else
      logsum += std::log(p) / orders;
  }
  score.brevity_penalty = (score.candidate_len > score.reference_len || score.candidate_len == 0)
                              ? 1.0
                              : std::exp(1.0 - (double)score.reference_len / (double)score.candidate_len);
  if (score.candidate_len == 0) score.brevity_penalty = 0.0;
  score.composite = zero ? 0.0 : score.brevity_penalty * std::exp(logsum) * 100.0;
  return score;
}

// Sentence-level BLEU used only for per-method comparison: add-one
// smoothing of zero n-gram counts, geometric mean over the orders the
// candidate actually has (up to 4).
inline double sentence_bleu(const TokenSeq& cand, const TokenSeq& ref) {
  if (cand.empty()) return 0.0;
  int max_n = std::min<int>(4, (int)cand.size());
  double logsum = 0;
  for (int n = 1; n <= max_n; ++n) {
    long tot = 0;
    long cl = detail::clipped_matches(cand, ref, n, &tot);
    double p = cl > 0 ? (double)cl / (double)tot : (double)(cl + 1) / (double)(tot + 1);
    logsum += std::log(p) / max_n;
  }
  double bp = cand.size() >= ref.size() ? 1.0 : std::exp(1.0 - (double)ref.size() / (double)cand.size());
  return bp * std::exp(logsum) * 100.0;
}

struct RougeScore {
  double precision = 0, recall = 0, f1 = 0;  // x100, corpus means
};

// per-sentence LCS scores (R = LCS/|ref|, P = LCS/|pred|, F with beta=1)
// averaged over sentences
inline RougeScore rouge_lcs(const SentenceMap& predictions, const SentenceMap& references) {
  check(!predictions.empty(), "rouge_lcs: empty prediction set");
  double p_sum = 0, r_sum = 0, f_sum = 0;
  long count = 0;
  for (auto& [id, cand] : predictions) {
    auto it = references.find(id);
    check(it != references.end(), "rouge_lcs: no reference for id " + id);
    const TokenSeq& ref = it->second;
    long lcs = detail::lcs_length(cand, ref);
    double p = cand.empty() ? 0.0 : (double)lcs / (double)cand.size();
    double r = ref.empty() ? 0.0 : (double)lcs / (double)ref.size();
    double f = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    p_sum += p;
    r_sum += r;
    f_sum += f;
    ++count;
  }
  return RougeScore{p_sum / count * 100.0, r_sum / count * 100.0, f_sum / count * 100.0};
}

// ---- action words (RQ2 protocol) ----

enum class ActionGrouping { top40, top10, top10n, getset };

inline const char* grouping_name(ActionGrouping g) {
  switch (g) {
    case ActionGrouping::top40: return "top-40";
    case ActionGrouping::top10: return "top-10";
    case ActionGrouping::top10n: return "top-10n";
    default: return "get-set";
  }
}

struct ActionWordRow {
  std::string word;
  long gold_count = 0, predicted_count = 0, correct = 0;
  double precision = 0, recall = 0;
};

struct ActionWordReport {
  double macro_precision = 0, macro_recall = 0;
  std::vector<ActionWordRow> rows;
};

// The action word is the first summary token. Gold-frequency ranking with
// lexicographic tie break; top-10n is ranks 2..12 with get/set removed.
inline std::vector<std::string> action_word_set(const SentenceMap& references, ActionGrouping grouping) {
  std::map<std::string, long> gold;
  for (auto& [id, ref] : references) {
    check(!ref.empty(), "action words: empty reference for id " + id);
    gold[ref.front()]++;
  }
  std::vector<std::pair<long, std::string>> ranked;
  for (auto& [w, c] : gold) ranked.push_back({c, w});
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::string> out;
  switch (grouping) {
    case ActionGrouping::top40:
      for (size_t i = 0; i < ranked.size() && i < 40; ++i) out.push_back(ranked[i].second);
      break;
    case ActionGrouping::top10:
      for (size_t i = 0; i < ranked.size() && i < 10; ++i) out.push_back(ranked[i].second);
      break;
    case ActionGrouping::top10n:
      for (size_t i = 1; i < ranked.size() && i < 12; ++i)
        if (ranked[i].second != "get" && ranked[i].second != "set") out.push_back(ranked[i].second);
      break;
    case ActionGrouping::getset:
      for (auto& [c, w] : ranked)
        if (w == "get" || w == "set") out.push_back(w);
      break;
  }
  check(!out.empty(), std::string("action words: grouping ") + grouping_name(grouping) + " is empty for this corpus");
  return out;
}

inline ActionWordReport action_word_metrics(const SentenceMap& predictions, const SentenceMap& references,
                                            ActionGrouping grouping) {
  std::vector<std::string> words = action_word_set(references, grouping);
  std::map<std::string, ActionWordRow> rows;
  for (const std::string& w : words) rows[w].word = w;
  std::map<std::string, long> predicted, correct, gold;
  for (auto& [id, ref] : references) {
    check(!ref.empty(), "action words: empty reference for id " + id);
    const std::string& gw = ref.front();
    gold[gw]++;
    auto pit = predictions.find(id);
    if (pit == predictions.end() || pit->second.empty()) continue;  // wrong; recall denominator keeps it
    const std::string& pw = pit->second.front();
    predicted[pw]++;
    if (pw == gw) correct[gw]++;
  }
  ActionWordReport report;
  for (auto& [w, row] : rows) {
    row.gold_count = gold.count(w) ? gold[w] : 0;
    row.predicted_count = predicted.count(w) ? predicted[w] : 0;
    row.correct = correct.count(w) ? correct[w] : 0;
    row.precision = row.predicted_count > 0 ? (double)row.correct / row.predicted_count : 0.0;
    row.recall = row.gold_count > 0 ? (double)row.correct / row.gold_count : 0.0;
    report.macro_precision += row.precision;
    report.macro_recall += row.recall;
    report.rows.push_back(row);
  }
  report.macro_precision /= (double)rows.size();
  report.macro_recall /= (double)rows.size();
  return report;
}

// rows/cols are the given word set plus an "other" bucket; cell counts of
// gold action word vs predicted action word
struct ConfusionMatrix {
  std::vector<std::string> labels;  // word set + "other"
  std::vector<long> counts;         // labels x labels, row-major (gold, predicted)

  long at(int gold_i, int pred_i) const { return counts[(size_t)gold_i * labels.size() + pred_i]; }
};

inline ConfusionMatrix confusion_matrix(const SentenceMap& predictions, const SentenceMap& references,
                                        const std::vector<std::string>& word_set) {
  check(!word_set.empty(), "confusion_matrix: empty word set");
  ConfusionMatrix cm;
  cm.labels = word_set;
  cm.labels.push_back("other");
  int n = (int)cm.labels.size();
  cm.counts.assign((size_t)n * n, 0);
  std::map<std::string, int> where;
  for (int i = 0; i < n - 1; ++i) where[cm.labels[i]] = i;
  auto slot = [&](const std::string& w) {
    auto it = where.find(w);
    return it == where.end() ? n - 1 : it->second;
  };
  for (auto& [id, ref] : references) {
    check(!ref.empty(), "confusion_matrix: empty reference for id " + id);
    int gi = slot(ref.front());
    auto pit = predictions.find(id);
    int pi = (pit == predictions.end() || pit->second.empty()) ? n - 1 : slot(pit->second.front());
    cm.counts[(size_t)gi * n + pi]++;
  }
  return cm;
}

// per-id smoothed sentence BLEU comparison; the counts partition the
// common id set
struct MethodComparison {
  long wins_a = 0, wins_b = 0, ties = 0;
};

inline MethodComparison per_method_comparison(const SentenceMap& preds_a, const SentenceMap& preds_b,
                                              const SentenceMap& references) {
  MethodComparison out;
  for (auto& [id, ca] : preds_a) {
    auto ib = preds_b.find(id);
    auto ir = references.find(id);
    if (ib == preds_b.end() || ir == references.end()) continue;
    double sa = sentence_bleu(ca, ir->second);
    double sb = sentence_bleu(ib->second, ir->second);
    if (sa > sb)
      out.wins_a++;
    else if (sb > sa)
      out.wins_b++;
    else
      out.ties++;
  }
  check(out.wins_a + out.wins_b + out.ties > 0, "per_method_comparison: no common ids");
  return out;
}

// ---- reports and files ----

struct EvalReport {
  BleuScore bleu;
  RougeScore rouge;
  std::map<std::string, ActionWordReport> action_words;  // grouping name -> report
  std::map<std::string, double> per_id_bleu;             // smoothed sentence BLEU
  std::map<std::string, double> per_id_rouge_f1;
  std::optional<MethodComparison> comparison;
  ConfusionMatrix confusion;
  long compared_ids = 0;
};

inline EvalReport evaluate(const SentenceMap& predictions, const SentenceMap& references,
                           const SentenceMap* predictions_b = nullptr) {
  EvalReport report;
  report.bleu = corpus_bleu(predictions, references);
  report.rouge = rouge_lcs(predictions, references);
  for (ActionGrouping g :
       {ActionGrouping::top40, ActionGrouping::top10, ActionGrouping::top10n, ActionGrouping::getset}) {
    try {
      report.action_words[grouping_name(g)] = action_word_metrics(predictions, references, g);
    } catch (const std::exception&) {
      // grouping empty for this corpus (e.g. no get/set summaries); omitted
    }
  }
  for (auto& [id, cand] : predictions) {
    const TokenSeq& ref = references.at(id);
    report.per_id_bleu[id] = sentence_bleu(cand, ref);
    long lcs = detail::lcs_length(cand, ref);
    double p = cand.empty() ? 0.0 : (double)lcs / cand.size();
    double r = ref.empty() ? 0.0 : (double)lcs / ref.size();
    report.per_id_rouge_f1[id] = (p + r) > 0 ? 200.0 * p * r / (p + r) : 0.0;
  }
  report.confusion = confusion_matrix(predictions, references, action_word_set(references, ActionGrouping::top10));
  report.compared_ids = (long)predictions.size();
  if (predictions_b) report.comparison = per_method_comparison(predictions, *predictions_b, references);
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["bleu"] = {{"composite", r.bleu.composite},
               {"precisions", r.bleu.precisions},
               {"brevity_penalty", r.bleu.brevity_penalty},
               {"candidate_len", r.bleu.candidate_len},
               {"reference_len", r.bleu.reference_len}};
  j["rouge_lcs"] = {{"precision", r.rouge.precision}, {"recall", r.rouge.recall}, {"f1", r.rouge.f1}};
  for (auto& [name, aw] : r.action_words) {
    nlohmann::json rows = nlohmann::json::array();
    for (const ActionWordRow& row : aw.rows)
      rows.push_back({{"word", row.word},
                      {"gold", row.gold_count},
                      {"predicted", row.predicted_count},
                      {"correct", row.correct},
                      {"precision", row.precision},
                      {"recall", row.recall}});
    j["action_words"][name] = {{"macro_precision", aw.macro_precision},
                               {"macro_recall", aw.macro_recall},
                               {"rows", rows}};
  }
  j["confusion"] = {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}};
  if (r.comparison)
    j["comparison"] = {{"wins_a", r.comparison->wins_a}, {"wins_b", r.comparison->wins_b},
                       {"ties", r.comparison->ties}};
  j["per_id"] = nlohmann::json::object();
  for (auto& [id, b] : r.per_id_bleu)
    j["per_id"][id] = {{"bleu", b}, {"rouge_f1", r.per_id_rouge_f1.at(id)}};
  j["compared_ids"] = r.compared_ids;
  return j;
}

// prediction files: one line per id, tab, space-joined tokens
inline void write_predictions(const std::string& path, const PredictionSet& preds) {
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "predictions: cannot write " + path);
  out << "# provenance: " << preds.provenance << "\n";
  for (auto& [id, toks] : preds.sentences) {
    out << id << '\t';
    for (size_t i = 0; i < toks.size(); ++i) out << (i ? " " : "") << toks[i];
    out << "\n";
  }
}

inline PredictionSet read_predictions(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "predictions: cannot read " + path);
  PredictionSet preds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("provenance: ");
      if (pos != std::string::npos) preds.provenance = line.substr(pos + 12);
      continue;
    }
    auto tab = line.find('\t');
    check(tab != std::string::npos, "predictions: malformed line in " + path);
    std::string id = line.substr(0, tab);
    TokenSeq toks;
    std::string tok;
    for (char c : line.substr(tab + 1)) {
      if (c == ' ') {
        if (!tok.empty()) toks.push_back(tok);
        tok.clear();
      } else {
        tok += c;
      }
    }
    if (!tok.empty()) toks.push_back(tok);
    check(!preds.sentences.count(id), "predictions: duplicate id " + id + " in " + path);
    preds.sentences[id] = std::move(toks);
  }
  return preds;
}

}  // namespace ctxsum

#endif
