#ifndef CTXSUM_ENCODERS_HPP
#define CTXSUM_ENCODERS_HPP

#include "graph.hpp"
#include "optim.hpp"

namespace ctxsum {

// names every GRU cell's parameters under a common prefix
template <typename R>
void add_gru_params(ParamStore<R>& store, const std::string& prefix, int e_in, int e, Rng& rng) {
  store.add(prefix + ".wz", init_matrix<R>(rng, e_in, e));
  store.add(prefix + ".uz", init_matrix<R>(rng, e, e));
  store.add(prefix + ".bz", init_bias<R>(e));
  store.add(prefix + ".wr", init_matrix<R>(rng, e_in, e));
  store.add(prefix + ".ur", init_matrix<R>(rng, e, e));
  store.add(prefix + ".br", init_bias<R>(e));
  store.add(prefix + ".wh", init_matrix<R>(rng, e_in, e));
  store.add(prefix + ".uh", init_matrix<R>(rng, e, e));
  store.add(prefix + ".bh", init_bias<R>(e));
}

inline long gru_param_count(int e_in, int e) { return 3L * ((long)e_in * e + (long)e * e + e); }

// loads one GRU's parameters onto the graph as leaves, recording the vars
template <typename R>
GruVars<R> gru_leaves(Graph<R>& g, const ParamStore<R>& store, const std::string& prefix,
                      std::map<std::string, Var>* vars) {
  auto leaf = [&](const std::string& suffix) {
    Var v = g.input(store.at(prefix + suffix));
    if (vars) (*vars)[prefix + suffix] = v;
    return v;
  };
  GruVars<R> p;
  p.wz = leaf(".wz"); p.uz = leaf(".uz"); p.bz = leaf(".bz");
  p.wr = leaf(".wr"); p.ur = leaf(".ur"); p.br = leaf(".br");
  p.wh = leaf(".wh"); p.uh = leaf(".uh"); p.bh = leaf(".bh");
  return p;
}

// final GRU state over word vectors, zero initial state; an all-masked
// sequence stays at the zero vector
template <typename R>
Var embed_subroutine(Graph<R>& g, const GruVars<R>& sub_gru, const std::vector<Var>& word_vecs,
                     const std::vector<uint8_t>& mask) {
  check(!word_vecs.empty(), "embed_subroutine: no word vectors");
  Var h0 = g.zeros({g.value(word_vecs[0]).rows(), g.value(sub_gru.uz).rows()});
  return gru_sequence(g, sub_gru, word_vecs, h0, mask).final;
}

// final GRU state over subroutine vectors in file order (separate cell from
// the subroutine-level GRU)
template <typename R>
Var embed_file(Graph<R>& g, const GruVars<R>& file_gru, const std::vector<Var>& sub_vecs,
               const std::vector<uint8_t>& mask) {
  check(!sub_vecs.empty(), "embed_file: no subroutine vectors");
  Var h0 = g.zeros({g.value(sub_vecs[0]).rows(), g.value(file_gru.uz).rows()});
  return gru_sequence(g, file_gru, sub_vecs, h0, mask).final;
}

// The project embedding is the f x e matrix of file vectors, not an
// aggregate; attention downstream does the combining. This just stacks the
// rows and passes the mask through.
template <typename R>
struct ProjectContext {
  Var matrix;  // [f x e] (or [b*f x e] in batched use)
  std::vector<uint8_t> mask;
};

template <typename R>
ProjectContext<R> embed_project_context(Graph<R>& g, const std::vector<Var>& file_vecs,
                                        const std::vector<uint8_t>& file_mask) {
  check(file_vecs.size() == file_mask.size(), "embed_project_context: mask size mismatch");
  ProjectContext<R> out;
  std::vector<Var> rows;
  for (size_t i = 0; i < file_vecs.size(); ++i) {
    rows.push_back(file_vecs[i]);
    if (!file_mask[i]) {
      // padded slot: zero row, mask false downstream
      rows.back() = g.zeros(g.value(file_vecs[i]).shape);
    }
  }
  // stack_steps with b=1 rows gives [f x e]
  out.matrix = g.stack_steps(rows);
  out.mask = file_mask;
  return out;
}

// Luong dot-score global attention, single example: queries [T x e] against
// keys/values [N x e] under a key mask. All-masked -> zero contexts and
// zero weights (degenerate contract).
template <typename R>
struct AttentionOut {
  Var contexts;                        // [T x e]
  std::shared_ptr<Tensor<R>> weights;  // [T x N]
};

template <typename R>
AttentionOut<R> attention(Graph<R>& g, Var queries, Var keys_values, const std::vector<uint8_t>& mask) {
  const Tensor<R>& tq = g.value(queries);
  const Tensor<R>& tk = g.value(keys_values);
  check(tq.shape.size() == 2 && tk.shape.size() == 2 && tq.cols() == tk.cols(), "attention: shape mismatch");
  int T = tq.rows(), N = tk.rows();
  check((int)mask.size() == N, "attention: mask size mismatch");
  // tile the keys per query so the batched step op applies (scatter-add in
  // its backward folds the copies back together)
  std::vector<int> tiled;
  tiled.reserve((size_t)T * N);
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n) tiled.push_back(n);
  Var kv = g.gather_rows(keys_values, tiled);
  std::vector<uint8_t> tiled_mask;
  tiled_mask.reserve((size_t)T * N);
  for (int t = 0; t < T; ++t) tiled_mask.insert(tiled_mask.end(), mask.begin(), mask.end());
  AttentionOut<R> out;
  out.contexts = g.attend(queries, kv, tiled_mask, N, &out.weights);
  return out;
}

}  // namespace ctxsum

#endif
