#ifndef CTXSUM_MODELS_HPP
#define CTXSUM_MODELS_HPP

#include <functional>
#include <memory>

#include "corpus.hpp"
#include "encoders.hpp"
#include "graph.hpp"
#include "optim.hpp"

namespace ctxsum {

struct ModelConfig {
  Variant variant = Variant::baseline;
  HyperParams hp;
  int vocab_size = 0;
  uint64_t vocab_hash = 0;
};

// One summarizer: a code-token GRU encoder and GRU decoder joined by Luong
// attention, with an optional context branch. The pc variant reuses the
// code encoder for context subroutines (shared word embedding and GRU) and
// adds only a file-level GRU plus a wider squash layer; fc skips the
// file-level GRU and attends sibling subroutine vectors directly.
template <typename R>
struct Model {
  ModelConfig cfg;
  ParamStore<R> store;

  static Model init(const ModelConfig& cfg, uint64_t seed) {
    cfg.hp.validate();
    check(cfg.vocab_size > 4, "model: vocab too small");
    Model m;
    m.cfg = cfg;
    Rng rng(seed);
    int e = cfg.hp.embed_dim, V = cfg.vocab_size;
    m.store.add("embedding", init_embedding<R>(rng, V, e));
    add_gru_params(m.store, "enc_gru", e, e, rng);
    add_gru_params(m.store, "dec_gru", e, e, rng);
    if (cfg.variant == Variant::pc) add_gru_params(m.store, "file_gru", e, e, rng);
    int cat = cfg.variant == Variant::baseline ? 2 * e : 3 * e;
    m.store.add("squash.w", init_matrix<R>(rng, cat, e));
    m.store.add("squash.b", init_bias<R>(e));
    m.store.add("out.w", init_matrix<R>(rng, e, V));
    m.store.add("out.b", init_bias<R>(V));
    return m;
  }

  struct Forward {
    std::map<std::string, Var> params;    // leaf var per named parameter
    std::vector<Var> step_probs;          // T entries of [B x V]
    Var loss;                             // set when targets were requested
    long token_count = 0;
  };

  // Builds the teacher-forced forward pass for a whole batch on the tape.
  Forward build_forward(Graph<R>& g, const Batch& batch, bool with_loss) const {
    check(batch.mode == cfg.variant, "forward: batch mode does not match model variant");
    const int B = batch.b, W = batch.w, T = batch.t, S = batch.s, F = batch.f;
    const int e = cfg.hp.embed_dim;
    Forward fw;
    auto leaf = [&](const std::string& name) {
      Var v = g.input(store.at(name));
      fw.params[name] = v;
      return v;
    };
    Var emb = leaf("embedding");
    GruVars<R> enc = gru_leaves(g, store, "enc_gru", &fw.params);
    GruVars<R> dec = gru_leaves(g, store, "dec_gru", &fw.params);
    Var squash_w = leaf("squash.w"), squash_b = leaf("squash.b");
    Var out_w = leaf("out.w"), out_b = leaf("out.b");

    auto column = [](const std::vector<int>& flat, int rows, int width, int col) {
      std::vector<int> out(rows);
      for (int i = 0; i < rows; ++i) out[i] = flat[(size_t)i * width + col];
      return out;
    };
    auto mask_column = [](const std::vector<uint8_t>& flat, int rows, int width, int col) {
      std::vector<uint8_t> out(rows);
      for (int i = 0; i < rows; ++i) out[i] = flat[(size_t)i * width + col];
      return out;
    };

    // run one GRU over a [rows x width] index block, masked per position
    auto run_encoder = [&](const GruVars<R>& cell, const std::vector<int>& idx, const std::vector<uint8_t>& msk,
                           int rows, int width, std::vector<Var>* states) {
      Var h = g.zeros({rows, e});
      for (int t = 0; t < width; ++t) {
        Var x = g.lookup(emb, column(idx, rows, width, t));
        Var hs = gru_step(g, cell, x, h);
        h = g.row_lerp(hs, h, mask_column(msk, rows, width, t));
        if (states) states->push_back(h);
      }
      return h;
    };

    std::vector<Var> enc_states;
    Var enc_final = run_encoder(enc, batch.code_idx, batch.code_mask, B, W, &enc_states);
    Var enc_kv = g.stack_steps(enc_states);

    Var ctx_kv;  // [B*N x e] with N = F (pc) or S (fc)
    int ctx_n = 0;
    std::vector<uint8_t> ctx_mask;
    if (cfg.variant == Variant::pc) {
      check(!batch.ctx_idx.empty(), "forward: pc batch is missing its context block");
      Var sub_emb = run_encoder(enc, batch.ctx_idx, batch.ctx_word_mask, B * F * S, W, nullptr);
      GruVars<R> file_gru = gru_leaves(g, store, "file_gru", &fw.params);
      Var hf = g.zeros({B * F, e});
      for (int j = 0; j < S; ++j) {
        std::vector<int> rows(B * F);
        for (int r = 0; r < B * F; ++r) rows[r] = r * S + j;
        Var xj = g.gather_rows(sub_emb, rows);
        Var hs = gru_step(g, file_gru, xj, hf);
        hf = g.row_lerp(hs, hf, mask_column(batch.ctx_sub_mask, B * F, S, j));
      }
      ctx_kv = hf;
      ctx_n = F;
      ctx_mask = batch.ctx_file_mask;
    } else if (cfg.variant == Variant::fc) {
      check(!batch.ctx_idx.empty(), "forward: fc batch is missing its context block");
      ctx_kv = run_encoder(enc, batch.ctx_idx, batch.ctx_word_mask, B * S, W, nullptr);
      ctx_n = S;
      ctx_mask = batch.ctx_sub_mask;
    }

    Var hd = enc_final;  // decoder starts from the encoder's final state
    std::vector<Var> ce_terms;
    for (int t = 0; t < T; ++t) {
      Var x = g.lookup(emb, column(batch.dec_in, B, T, t));
      hd = gru_step(g, dec, x, hd);
      Var c_code = g.attend(hd, enc_kv, batch.code_mask, W);
      std::vector<Var> cat{c_code};
      if (cfg.variant != Variant::baseline) cat.push_back(g.attend(hd, ctx_kv, ctx_mask, ctx_n));
      cat.push_back(hd);
      Var sq = dense(g, g.concat_cols(cat), squash_w, squash_b, Activation::tanh);
      Var probs = g.softmax(dense(g, sq, out_w, out_b, Activation::none));
      fw.step_probs.push_back(probs);
      if (with_loss) {
        std::vector<int> tgt = column(batch.dec_tgt, B, T, t);
        std::vector<uint8_t> msk = mask_column(batch.tgt_mask, B, T, t);
        bool any = false;
        for (uint8_t b : msk) any |= (b != 0);
        if (any) {
          ce_terms.push_back(g.nll_sum(fw.step_probs.back(), tgt, msk));
          for (uint8_t b : msk) fw.token_count += (b != 0);
        }
      }
    }
    if (with_loss) {
      check(fw.token_count > 0, "forward: no unmasked target tokens");
      fw.loss = g.scale(g.add_n(ce_terms), R(1) / (R)fw.token_count);
    }
    return fw;
  }

  // teacher-forced probabilities, rows (example-major) [B*T x V]
  Tensor<R> forward_probs(const Batch& batch) const {
    Graph<R> g;
    Forward fw = build_forward(g, batch, false);
    const int B = batch.b, T = batch.t, V = cfg.vocab_size;
    Tensor<R> out = Tensor<R>::zeros({B * T, V});
    for (int t = 0; t < T; ++t) {
      const Tensor<R>& p = g.value(fw.step_probs[t]);
      for (int i = 0; i < B; ++i)
        std::copy(&p.data[(size_t)i * V], &p.data[(size_t)(i + 1) * V], &out.data[((size_t)i * T + t) * V]);
    }
    return out;
  }

  // mean cross-entropy over unmasked targets plus gradients by param name
  double loss_and_grads(const Batch& batch, std::map<std::string, Tensor<R>>* grads) const {
    Graph<R> g;
    Forward fw = build_forward(g, batch, true);
    double loss = (double)g.value(fw.loss).data[0];
    if (grads) {
      g.backward(fw.loss);
      grads->clear();
      for (auto& [name, var] : fw.params) (*grads)[name] = g.grad(var);
    }
    return loss;
  }

  long param_count() const { return store.total_size(); }
};

// Incremental greedy decoding state for one example (batch of size 1):
// encoder/context run once, then the decoder is stepped token by token.
template <typename R>
class StepDecoder {
 public:
  StepDecoder(const Model<R>& m, const Batch& example) {
    check(example.b == 1, "decoder: expected a single-example batch");
    check(example.mode == m.cfg.variant, "decoder: batch mode does not match model variant");
    const int e = m.cfg.hp.embed_dim;
    emb_ = g_.input(m.store.at("embedding"));
    dec_ = gru_leaves(g_, m.store, "dec_gru", nullptr);
    squash_w_ = g_.input(m.store.at("squash.w"));
    squash_b_ = g_.input(m.store.at("squash.b"));
    out_w_ = g_.input(m.store.at("out.w"));
    out_b_ = g_.input(m.store.at("out.b"));
    GruVars<R> enc = gru_leaves(g_, m.store, "enc_gru", nullptr);

    auto encode_block = [&](const GruVars<R>& cell, const std::vector<int>& idx, const std::vector<uint8_t>& msk,
                            int rows, int width, std::vector<Var>* states) {
      Var h = g_.zeros({rows, e});
      for (int t = 0; t < width; ++t) {
        std::vector<int> col(rows);
        std::vector<uint8_t> mcol(rows);
        for (int r = 0; r < rows; ++r) {
          col[r] = idx[(size_t)r * width + t];
          mcol[r] = msk[(size_t)r * width + t];
        }
        Var hs = gru_step(g_, cell, g_.lookup(emb_, col), h);
        h = g_.row_lerp(hs, h, mcol);
        if (states) states->push_back(h);
      }
      return h;
    };

    const int W = example.w, S = example.s, F = example.f;
    std::vector<Var> enc_states;
    hd_ = encode_block(enc, example.code_idx, example.code_mask, 1, W, &enc_states);
    enc_kv_ = g_.stack_steps(enc_states);
    code_mask_ = example.code_mask;
    n_code_ = W;
    if (m.cfg.variant == Variant::pc) {
      Var sub_emb = encode_block(enc, example.ctx_idx, example.ctx_word_mask, F * S, W, nullptr);
      GruVars<R> file_gru = gru_leaves(g_, m.store, "file_gru", nullptr);
      Var hf = g_.zeros({F, e});
      for (int j = 0; j < S; ++j) {
        std::vector<int> rows(F);
        std::vector<uint8_t> mcol(F);
        for (int r = 0; r < F; ++r) {
          rows[r] = r * S + j;
          mcol[r] = example.ctx_sub_mask[(size_t)r * S + j];
        }
        Var hs = gru_step(g_, file_gru, g_.gather_rows(sub_emb, rows), hf);
        hf = g_.row_lerp(hs, hf, mcol);
      }
      // single example: [F x e] rows are the f file embeddings
      ctx_kv_ = hf;
      ctx_mask_ = example.ctx_file_mask;
      n_ctx_ = F;
    } else if (m.cfg.variant == Variant::fc) {
      ctx_kv_ = encode_block(enc, example.ctx_idx, example.ctx_word_mask, S, W, nullptr);
      ctx_mask_ = example.ctx_sub_mask;
      n_ctx_ = S;
    }
  }

  // feeds one token, returns the next-token distribution
  std::vector<double> step(int prev_token) {
    hd_ = gru_step(g_, dec_, g_.lookup(emb_, {prev_token}), hd_);
    Var c_code = g_.attend(hd_, enc_kv_, code_mask_, n_code_);
    std::vector<Var> cat{c_code};
    if (ctx_kv_.valid()) cat.push_back(g_.attend(hd_, ctx_kv_, ctx_mask_, n_ctx_));
    cat.push_back(hd_);
    Var sq = dense(g_, g_.concat_cols(cat), squash_w_, squash_b_, Activation::tanh);
    Var probs = g_.softmax(dense(g_, sq, out_w_, out_b_, Activation::none));
    const Tensor<R>& p = g_.value(probs);
    return std::vector<double>(p.data.begin(), p.data.end());
  }

 private:
  Graph<R> g_;
  Var emb_, squash_w_, squash_b_, out_w_, out_b_;
  GruVars<R> dec_;
  Var hd_, enc_kv_, ctx_kv_;
  std::vector<uint8_t> code_mask_, ctx_mask_;
  int n_code_ = 0, n_ctx_ = 0;
};

// Greedy argmax loop over a per-step distribution source. Ties pick the
// lowest index; END terminates and is not emitted; at most max_len tokens.
inline std::vector<int> greedy_decode_steps(const std::function<std::vector<double>(int)>& step, int max_len) {
  std::vector<int> out;
  int prev = Vocab::kStart;
  for (int t = 0; t < max_len; ++t) {
    std::vector<double> dist = step(prev);
    int best = 0;
    for (int i = 1; i < (int)dist.size(); ++i)
      if (dist[i] > dist[best]) best = i;
    if (best == Vocab::kEnd) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

template <typename R>
std::vector<int> decode_greedy(const Model<R>& model, const Batch& example, int max_len) {
  StepDecoder<R> dec(model, example);
  return greedy_decode_steps([&](int prev) { return dec.step(prev); }, max_len);
}

// Greedy decoding over the element-wise mean of the member distributions;
// every member is fed the ensemble's emitted prefix. Members may be
// different variants (e.g. baseline + pc), so each gets an example batch
// built for its own mode; examples[i] must belong to model[i].
template <typename R>
std::vector<int> ensemble_decode(const std::vector<const Model<R>*>& models, const std::vector<Batch>& examples,
                                 int max_len) {
  check(!models.empty(), "ensemble: no models");
  check(models.size() == examples.size(), "ensemble: one example batch per member required");
  for (const Model<R>* m : models)
    check(m->cfg.vocab_hash == models[0]->cfg.vocab_hash && m->cfg.vocab_size == models[0]->cfg.vocab_size,
          "ensemble: member vocabularies differ");
  std::vector<std::unique_ptr<StepDecoder<R>>> decs;
  for (size_t i = 0; i < models.size(); ++i)
    decs.push_back(std::make_unique<StepDecoder<R>>(*models[i], examples[i]));
  auto step = [&](int prev) {
    std::vector<double> mean;
    for (auto& d : decs) {
      std::vector<double> p = d->step(prev);
      if (mean.empty()) mean.assign(p.size(), 0.0);
      for (size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
    }
    for (double& v : mean) v /= (double)decs.size();
    return mean;
  };
  return greedy_decode_steps(step, max_len);
}

template <typename R>
std::vector<int> ensemble_decode(const std::vector<const Model<R>*>& models, const Batch& example, int max_len) {
  return ensemble_decode(models, std::vector<Batch>(models.size(), example), max_len);
}

inline std::vector<std::string> indices_to_tokens(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (int i : ids) out.push_back(vocab.word(i));
  return out;
}

}  // namespace ctxsum

#endif
