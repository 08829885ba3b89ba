#ifndef CTXSUM_CORPUS_HPP
#define CTXSUM_CORPUS_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rng.hpp"
#include "tensor.hpp"

namespace ctxsum {

enum class RnnKind { gru };

// The paper-table knobs (e, v, w, s, f, RNN) plus the settings the paper
// leaves open. Defaults follow the published table.
struct HyperParams {
  int embed_dim = 100;        // e
  int vocab_cap = 10000;      // v
  int words_per_sub = 25;     // w
  int subs_per_file = 10;     // s
  int files_per_project = 10; // f
  RnnKind rnn = RnnKind::gru;
  int decode_max_len = 13;
  int batch_size = 32;
  uint64_t select_seed = 1;
  uint64_t init_seed = 1;
  float lr = 1e-3f;

  void validate() const {
    check(embed_dim >= 1 && vocab_cap >= 1 && words_per_sub >= 1 && subs_per_file >= 1 &&
              files_per_project >= 1 && decode_max_len >= 1 && batch_size >= 1,
          "hyperparams: all sizes must be >= 1");
  }
};

struct Subroutine {
  std::string id;
  std::string project_id;
  std::string file_id;
  int position_in_file = 0;
  std::vector<std::string> code_tokens;
  std::vector<std::string> summary_tokens;
};

struct CorpusFile {
  std::string file_id;
  std::string project_id;
  std::vector<std::string> subroutine_ids;  // in position_in_file order
};

struct Project {
  std::string project_id;
  std::vector<std::string> file_ids;  // in first-appearance order
};

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

// ---- tokenization ----

// Splits camelCase/PascalCase at lower->upper boundaries, acronym->word
// boundaries (HTTPServer -> http server), and letter<->digit boundaries;
// underscores and punctuation separate; everything lowercased.
inline std::vector<std::string> tokenize(const std::string& raw) {
  std::vector<std::string> out;
  auto is_letter = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
  auto is_lower = [](char c) { return c >= 'a' && c <= 'z'; };

  size_t i = 0, n = raw.size();
  while (i < n) {
    if (is_digit(raw[i])) {
      size_t j = i;
      while (j < n && is_digit(raw[j])) ++j;
      out.push_back(raw.substr(i, j - i));
      i = j;
    } else if (is_letter(raw[i])) {
      size_t j = i;
      while (j < n && is_letter(raw[j])) ++j;
      // camel-split the letter run [i, j)
      size_t start = i;
      for (size_t k = i + 1; k < j; ++k) {
        bool boundary = (is_lower(raw[k - 1]) && is_upper(raw[k])) ||
                        (is_upper(raw[k - 1]) && is_upper(raw[k]) && k + 1 < j && is_lower(raw[k + 1]));
        if (boundary) {
          out.push_back(raw.substr(start, k - start));
          start = k;
        }
      }
      out.push_back(raw.substr(start, j - start));
      i = j;
    } else {
      ++i;  // separator
    }
  }
  for (std::string& t : out)
    for (char& c : t) c = (char)std::tolower((unsigned char)c);
  return out;
}

// ---- vocabulary ----

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;
  static constexpr int kStart = 2;
  static constexpr int kEnd = 3;

  std::vector<std::string> words;                   // index -> word
  std::unordered_map<std::string, int> index;       // word -> index
  std::map<std::string, long> freq;                 // training frequency

  int size() const { return (int)words.size(); }

  int lookup(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? kOov : it->second;
  }

  const std::string& word(int i) const { return words.at(i); }

  uint64_t hash() const {
    uint64_t h = fnv1a64("ctxsum-vocab");
    for (const std::string& w : words) h = mix_seed(h, fnv1a64(w));
    return h;
  }
};

// top-v words by joint code+summary frequency over the given (training)
// subroutines; ties broken lexicographically; specials prepended
inline Vocab build_vocab(const std::vector<const Subroutine*>& training, int v) {
  check(!training.empty(), "build_vocab: empty training set");
  Vocab vb;
  for (const Subroutine* s : training) {
    for (const std::string& t : s->code_tokens) vb.freq[t]++;
    for (const std::string& t : s->summary_tokens) vb.freq[t]++;
  }
  std::vector<std::pair<long, std::string>> ranked;
  for (auto& [w, c] : vb.freq) ranked.push_back({c, w});
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  if ((int)ranked.size() > v) ranked.resize(v);
  vb.words = {"<pad>", "<oov>", "<s>", "</s>"};
  for (auto& [c, w] : ranked) vb.words.push_back(w);
  for (int i = 0; i < (int)vb.words.size(); ++i) vb.index[vb.words[i]] = i;
  return vb;
}

struct Encoded {
  std::vector<int> idx;
  std::vector<uint8_t> mask;
};

// OOV-maps, optionally wraps in START/END, truncates to target_len (after
// the wrap), right-pads with PAD and a false mask
inline Encoded encode_tokens(const std::vector<std::string>& tokens, const Vocab& vocab, int target_len,
                             bool add_start_end) {
  check(target_len >= 1, "encode_tokens: target_len must be >= 1");
  std::vector<int> seq;
  if (add_start_end) seq.push_back(Vocab::kStart);
  for (const std::string& t : tokens) seq.push_back(vocab.lookup(t));
  if (add_start_end) seq.push_back(Vocab::kEnd);
  if ((int)seq.size() > target_len) seq.resize(target_len);
  Encoded e;
  e.idx.assign(target_len, Vocab::kPad);
  e.mask.assign(target_len, 0);
  for (size_t i = 0; i < seq.size(); ++i) {
    e.idx[i] = seq[i];
    e.mask[i] = 1;
  }
  return e;
}

// ---- corpus container ----

struct Corpus {
  std::vector<Subroutine> subroutines;
  std::unordered_map<std::string, int> sub_index;        // id -> position
  std::map<std::string, CorpusFile> files;
  std::map<std::string, Project> projects;
  std::map<std::string, Split> splits;                   // project -> split
  long duplicates_dropped = 0;

  const Subroutine& sub(const std::string& id) const {
    auto it = sub_index.find(id);
    check(it != sub_index.end(), "corpus: unknown subroutine " + id);
    return subroutines[it->second];
  }

  Split split_of(const Subroutine& s) const {
    auto it = splits.find(s.project_id);
    check(it != splits.end(), "corpus: project missing from splits: " + s.project_id);
    return it->second;
  }

  std::vector<const Subroutine*> split_subs(Split sp) const {
    std::vector<const Subroutine*> out;
    for (const Subroutine& s : subroutines)
      if (split_of(s) == sp) out.push_back(&s);
    return out;
  }
};

namespace detail {

inline std::vector<std::string> tokens_from_json(const nlohmann::json& j, const std::string& rec) {
  std::vector<std::string> toks;
  if (j.is_string()) {
    toks = tokenize(j.get<std::string>());
  } else if (j.is_array()) {
    for (auto& e : j) {
      check(e.is_string(), "corpus: non-string token in record " + rec);
      std::string t = e.get<std::string>();
      for (char& c : t) c = (char)std::tolower((unsigned char)c);
      check(!t.empty() && t.find_first_of(" \t\n\r") == std::string::npos,
            "corpus: bad pre-tokenized token in record " + rec);
      toks.push_back(t);
    }
  } else {
    throw std::runtime_error("corpus: code/summary must be text or token array in record " + rec);
  }
  return toks;
}

inline Split parse_split(const std::string& s, const std::string& what) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::runtime_error("splits: unknown split '" + s + "' for " + what);
}

}  // namespace detail

// Reads <dir>/subroutines.jsonl and <dir>/splits.json. splits.json is either
// {"project": "train", ...} or {"train": [...], "val": [...], "test": [...]};
// the inverted form makes double assignment detectable. Exact code-token
// duplicates are dropped, first occurrence wins.
inline Corpus load_corpus(const std::string& dir) {
  Corpus c;
  std::ifstream in(dir + "/subroutines.jsonl");
  check(in.good(), "corpus: cannot open " + dir + "/subroutines.jsonl");
  std::string line;
  long lineno = 0;
  std::set<std::vector<std::string>> seen_code;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus: malformed json at line " + std::to_string(lineno) + ": " + e.what());
    }
    std::string rec = "line " + std::to_string(lineno);
    for (const char* key : {"id", "project_id", "file_id", "position_in_file", "code", "summary"})
      check(j.contains(key), "corpus: missing field '" + std::string(key) + "' in record at " + rec);
    Subroutine s;
    s.id = j["id"].get<std::string>();
    s.project_id = j["project_id"].get<std::string>();
    s.file_id = j["file_id"].get<std::string>();
    s.position_in_file = j["position_in_file"].get<int>();
    s.code_tokens = detail::tokens_from_json(j["code"], s.id);
    s.summary_tokens = detail::tokens_from_json(j["summary"], s.id);
    check(!s.code_tokens.empty(), "corpus: empty code tokens in record " + s.id);
    check(!s.summary_tokens.empty(), "corpus: empty summary tokens in record " + s.id);
    check(!c.sub_index.count(s.id), "corpus: duplicate subroutine id " + s.id);

    auto& proj = c.projects[s.project_id];
    proj.project_id = s.project_id;
    auto& file = c.files[s.file_id];
    if (file.file_id.empty()) {
      file.file_id = s.file_id;
      file.project_id = s.project_id;
      proj.file_ids.push_back(s.file_id);
    }
    check(file.project_id == s.project_id, "corpus: file " + s.file_id + " spans projects");

    if (!seen_code.insert(s.code_tokens).second) {
      c.duplicates_dropped++;
      continue;
    }
    c.sub_index[s.id] = (int)c.subroutines.size();
    file.subroutine_ids.push_back(s.id);
    c.subroutines.push_back(std::move(s));
  }
  check(!c.subroutines.empty(), "corpus: no subroutines loaded from " + dir);

  // file order must follow position_in_file
  for (auto& [fid, file] : c.files) {
    std::stable_sort(file.subroutine_ids.begin(), file.subroutine_ids.end(),
                     [&](const std::string& a, const std::string& b) {
                       return c.sub(a).position_in_file < c.sub(b).position_in_file;
                     });
    for (size_t i = 1; i < file.subroutine_ids.size(); ++i)
      check(c.sub(file.subroutine_ids[i - 1]).position_in_file != c.sub(file.subroutine_ids[i]).position_in_file,
            "corpus: duplicate position_in_file in file " + fid);
  }

  std::ifstream sin(dir + "/splits.json");
  check(sin.good(), "corpus: cannot open " + dir + "/splits.json");
  nlohmann::json sj;
  try {
    sin >> sj;
  } catch (const std::exception& e) {
    throw std::runtime_error("splits: malformed json: " + std::string(e.what()));
  }
  check(sj.is_object(), "splits: top level must be an object");
  bool inverted = !sj.empty() && sj.begin().value().is_array();
  if (inverted) {
    for (auto& [name, arr] : sj.items()) {
      Split sp = detail::parse_split(name, "split list");
      check(arr.is_array(), "splits: mixed forms");
      for (auto& p : arr) {
        std::string pid = p.get<std::string>();
        check(!c.splits.count(pid), "splits: project " + pid + " assigned to multiple splits");
        c.splits[pid] = sp;
      }
    }
  } else {
    for (auto& [pid, val] : sj.items()) {
      check(val.is_string(), "splits: value for " + pid + " must be a split name");
      c.splits[pid] = detail::parse_split(val.get<std::string>(), "project " + pid);
    }
  }
  for (auto& [pid, proj] : c.projects)
    check(c.splits.count(pid), "splits: project " + pid + " missing from splits.json");
  for (auto& [pid, sp] : c.splits)
    check(c.projects.count(pid), "splits: unknown project " + pid + " in splits.json");
  return c;
}

// ---- SELECT and file context ----

struct SelectedFiles {
  std::vector<std::string> file_ids;  // <= f entries, seeded-shuffle order
  int pad_count = 0;
};

// Uniform sample without replacement of min(f, usable files) from the
// project, seeded per (seed, subroutine id) so selection is stable for a
// run. Files with no subroutines are skipped.
inline SelectedFiles select_context_files(const Corpus& corpus, const Project& project, const Subroutine& target,
                                          int f, uint64_t seed) {
  check(!project.file_ids.empty(), "select: project " + project.project_id + " has no files");
  std::vector<std::string> usable;
  for (const std::string& fid : project.file_ids)
    if (!corpus.files.at(fid).subroutine_ids.empty()) usable.push_back(fid);
  SelectedFiles out;
  Rng rng(mix_seed(seed, fnv1a64(target.id)));
  rng.shuffle(usable);
  int take = std::min<int>(f, (int)usable.size());
  out.file_ids.assign(usable.begin(), usable.begin() + take);
  out.pad_count = f - take;
  return out;
}

// first s subroutines of the file in file order, excluding the target
inline std::vector<std::string> select_file_context(const Corpus& corpus, const CorpusFile& file,
                                                    const Subroutine& target, int s) {
  (void)corpus;
  check(target.file_id == file.file_id, "select_file_context: target not in file " + file.file_id);
  std::vector<std::string> out;
  for (const std::string& id : file.subroutine_ids) {
    if ((int)out.size() >= s) break;
    if (id == target.id) continue;
    out.push_back(id);
  }
  return out;
}

// ---- batches ----

enum class Variant { baseline, fc, pc };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::fc: return "fc";
    default: return "pc";
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "fc") return Variant::fc;
  if (s == "pc") return Variant::pc;
  throw std::runtime_error("unknown variant '" + s + "' (expected baseline|fc|pc)");
}

// Fixed-shape index/mask blocks for a batch of examples. Context blocks are
// present per mode: fc keeps an s*w sibling block, pc an f*s*w project block.
struct Batch {
  Variant mode = Variant::baseline;
  int b = 0, w = 0, t = 0, s = 0, f = 0;
  std::vector<std::string> ids;

  std::vector<int> code_idx;        // b*w
  std::vector<uint8_t> code_mask;   // b*w
  std::vector<int> dec_in;          // b*t
  std::vector<int> dec_tgt;         // b*t
  std::vector<uint8_t> tgt_mask;    // b*t

  std::vector<int> ctx_idx;          // pc: b*f*s*w, fc: b*s*w
  std::vector<uint8_t> ctx_word_mask;
  std::vector<uint8_t> ctx_sub_mask;   // pc: b*f*s, fc: b*s
  std::vector<uint8_t> ctx_file_mask;  // pc: b*f
};

inline Batch make_batch(const Corpus& corpus, const Vocab& vocab, const HyperParams& hp,
                        const std::vector<const Subroutine*>& subs, Variant mode) {
  hp.validate();
  Batch batch;
  batch.mode = mode;
  batch.b = (int)subs.size();
  batch.w = hp.words_per_sub;
  batch.t = hp.decode_max_len;
  batch.s = hp.subs_per_file;
  batch.f = hp.files_per_project;
  const int B = batch.b, W = batch.w, T = batch.t, S = batch.s, F = batch.f;
  batch.code_idx.assign((size_t)B * W, Vocab::kPad);
  batch.code_mask.assign((size_t)B * W, 0);
  batch.dec_in.assign((size_t)B * T, Vocab::kPad);
  batch.dec_tgt.assign((size_t)B * T, Vocab::kPad);
  batch.tgt_mask.assign((size_t)B * T, 0);
  if (mode == Variant::pc) {
    batch.ctx_idx.assign((size_t)B * F * S * W, Vocab::kPad);
    batch.ctx_word_mask.assign((size_t)B * F * S * W, 0);
    batch.ctx_sub_mask.assign((size_t)B * F * S, 0);
    batch.ctx_file_mask.assign((size_t)B * F, 0);
  } else if (mode == Variant::fc) {
    batch.ctx_idx.assign((size_t)B * S * W, Vocab::kPad);
    batch.ctx_word_mask.assign((size_t)B * S * W, 0);
    batch.ctx_sub_mask.assign((size_t)B * S, 0);
  }

  auto put_words = [&](const Subroutine& sub, int* idx, uint8_t* msk) {
    Encoded e = encode_tokens(sub.code_tokens, vocab, W, false);
    std::copy(e.idx.begin(), e.idx.end(), idx);
    std::copy(e.mask.begin(), e.mask.end(), msk);
  };

  for (int i = 0; i < B; ++i) {
    const Subroutine& sub = *subs[i];
    batch.ids.push_back(sub.id);
    put_words(sub, &batch.code_idx[(size_t)i * W], &batch.code_mask[(size_t)i * W]);

    // teacher-forcing shift: input starts at START, target ends at END
    const std::vector<std::string>& sum = sub.summary_tokens;
    for (int t = 0; t < T; ++t) {
      int in_tok = t == 0 ? Vocab::kStart : (t - 1 < (int)sum.size() ? vocab.lookup(sum[t - 1]) : Vocab::kPad);
      int tgt_tok = t < (int)sum.size() ? vocab.lookup(sum[t]) : (t == (int)sum.size() ? Vocab::kEnd : Vocab::kPad);
      batch.dec_in[(size_t)i * T + t] = in_tok;
      batch.dec_tgt[(size_t)i * T + t] = tgt_tok;
      batch.tgt_mask[(size_t)i * T + t] = tgt_tok != Vocab::kPad;
    }

    if (mode == Variant::pc) {
      const Project& proj = corpus.projects.at(sub.project_id);
      SelectedFiles sel = select_context_files(corpus, proj, sub, F, hp.select_seed);
      for (int k = 0; k < (int)sel.file_ids.size(); ++k) {
        batch.ctx_file_mask[(size_t)i * F + k] = 1;
        const CorpusFile& file = corpus.files.at(sel.file_ids[k]);
        int nsubs = std::min<int>(S, (int)file.subroutine_ids.size());
        for (int j = 0; j < nsubs; ++j) {
          const Subroutine& cs = corpus.sub(file.subroutine_ids[j]);
          size_t base = (((size_t)i * F + k) * S + j) * W;
          put_words(cs, &batch.ctx_idx[base], &batch.ctx_word_mask[base]);
          batch.ctx_sub_mask[((size_t)i * F + k) * S + j] = 1;
        }
      }
    } else if (mode == Variant::fc) {
      const CorpusFile& file = corpus.files.at(sub.file_id);
      std::vector<std::string> sibs = select_file_context(corpus, file, sub, S);
      for (int j = 0; j < (int)sibs.size(); ++j) {
        const Subroutine& cs = corpus.sub(sibs[j]);
        size_t base = ((size_t)i * S + j) * W;
        put_words(cs, &batch.ctx_idx[base], &batch.ctx_word_mask[base]);
        batch.ctx_sub_mask[(size_t)i * S + j] = 1;
      }
    }
  }
  return batch;
}

}  // namespace ctxsum

#endif
