#ifndef CTXSUM_GRAPH_HPP
#define CTXSUM_GRAPH_HPP

#include <algorithm>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "tensor.hpp"

namespace ctxsum {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Ops append nodes holding the forward value and a
// closure that routes the node's gradient to its parents. backward(loss)
// walks the tape once in reverse. Values are immutable once recorded, so
// a finished graph can be read from any thread; building and backward are
// single-writer.
template <typename R>
class Graph {
 public:
  struct Node {
    Tensor<R> value;
    std::vector<int> parents;
    std::function<void(Graph&, int)> back;  // may be empty (leaf)
  };

  const Tensor<R>& value(Var v) const { return nodes_[v.id].value; }

  // gradient of the last backward() target w.r.t. v; zeros if untouched
  Tensor<R> grad(Var v) const {
    if ((size_t)v.id < grads_.size() && !grads_[v.id].empty()) return grads_[v.id];
    return Tensor<R>::zeros(nodes_[v.id].value.shape);
  }

  size_t size() const { return nodes_.size(); }

  Var input(Tensor<R> t) { return push(std::move(t), {}, nullptr); }

  Var zeros(std::vector<int> shape) { return input(Tensor<R>::zeros(std::move(shape))); }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    const Tensor<R>&ta = value(a), &tb = value(b);
    check(ta.same_shape(tb), "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor<R> out = ta;
    for (long i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
    return push(std::move(out), {a.id, b.id}, [](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      g.accum(g.nodes_[id].parents[0], go);
      g.accum(g.nodes_[id].parents[1], go);
    });
  }

  Var mul(Var a, Var b) {
    const Tensor<R>&ta = value(a), &tb = value(b);
    check(ta.same_shape(tb), "mul: shape mismatch");
    Tensor<R> out = ta;
    for (long i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
    return push(std::move(out), {a.id, b.id}, [](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      int pa = g.nodes_[id].parents[0], pb = g.nodes_[id].parents[1];
      Tensor<R> da = go, db = go;
      for (long i = 0; i < go.numel(); ++i) {
        da.data[i] *= g.nodes_[pb].value.data[i];
        db.data[i] *= g.nodes_[pa].value.data[i];
      }
      g.accum(pa, da);
      g.accum(pb, db);
    });
  }

  Var add_n(const std::vector<Var>& vs) {
    check(!vs.empty(), "add_n: empty");
    Tensor<R> out = value(vs[0]);
    std::vector<int> par{vs[0].id};
    for (size_t k = 1; k < vs.size(); ++k) {
      const Tensor<R>& t = value(vs[k]);
      check(t.same_shape(out), "add_n: shape mismatch");
      for (long i = 0; i < out.numel(); ++i) out.data[i] += t.data[i];
      par.push_back(vs[k].id);
    }
    return push(std::move(out), std::move(par), [](Graph& g, int id) {
      for (int p : g.nodes_[id].parents) g.accum(p, g.grads_[id]);
    });
  }

  Var scale(Var x, R c) {
    Tensor<R> out = value(x);
    for (R& v : out.data) v *= c;
    return push(std::move(out), {x.id}, [c](Graph& g, int id) {
      Tensor<R> gx = g.grads_[id];
      for (R& v : gx.data) v *= c;
      g.accum(g.nodes_[id].parents[0], gx);
    });
  }

  Var sum(Var x) {
    const Tensor<R>& tx = value(x);
    double total = 0;
    for (R v : tx.data) total += (double)v;
    return push(Tensor<R>::scalar((R)total), {x.id}, [](Graph& g, int id) {
      R g0 = g.grads_[id].data[0];
      int p = g.nodes_[id].parents[0];
      Tensor<R> dx = Tensor<R>::zeros(g.nodes_[p].value.shape);
      for (R& v : dx.data) v = g0;
      g.accum(p, dx);
    });
  }

  Var one_minus(Var x) {
    Tensor<R> out = value(x);
    for (R& v : out.data) v = R(1) - v;
    return push(std::move(out), {x.id}, [](Graph& g, int id) {
      Tensor<R> gx = g.grads_[id];
      for (R& v : gx.data) v = -v;
      g.accum(g.nodes_[id].parents[0], gx);
    });
  }

  Var sigmoid(Var x) {
    Tensor<R> out = value(x);
    for (R& v : out.data) v = R(1) / (R(1) + std::exp(-v));
    return push(std::move(out), {x.id}, [](Graph& g, int id) {
      const Tensor<R>&go = g.grads_[id], &y = g.nodes_[id].value;
      Tensor<R> gx = go;
      for (long i = 0; i < gx.numel(); ++i) gx.data[i] *= y.data[i] * (R(1) - y.data[i]);
      g.accum(g.nodes_[id].parents[0], gx);
    });
  }

  Var tanh_(Var x) {
    Tensor<R> out = value(x);
    for (R& v : out.data) v = std::tanh(v);
    return push(std::move(out), {x.id}, [](Graph& g, int id) {
      const Tensor<R>&go = g.grads_[id], &y = g.nodes_[id].value;
      Tensor<R> gx = go;
      for (long i = 0; i < gx.numel(); ++i) gx.data[i] *= R(1) - y.data[i] * y.data[i];
      g.accum(g.nodes_[id].parents[0], gx);
    });
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const Tensor<R>&ta = value(a), &tb = value(b);
    check(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.cols() == tb.rows(),
          "matmul: bad shapes " + ta.shape_str() + " * " + tb.shape_str());
    int m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor<R> out = Tensor<R>::zeros({m, n});
    for (int i = 0; i < m; ++i) {
      const R* arow = &ta.data[(size_t)i * k];
      R* orow = &out.data[(size_t)i * n];
      for (int kk = 0; kk < k; ++kk) {
        R av = arow[kk];
        if (av == R(0)) continue;
        const R* brow = &tb.data[(size_t)kk * n];
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
    return push(std::move(out), {a.id, b.id}, [m, k, n](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      int pa = g.nodes_[id].parents[0], pb = g.nodes_[id].parents[1];
      const Tensor<R>&ta = g.nodes_[pa].value, &tb = g.nodes_[pb].value;
      Tensor<R> da = Tensor<R>::zeros({m, k}), db = Tensor<R>::zeros({k, n});
      // dA = G * B^T
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          R gv = go.data[(size_t)i * n + j];
          if (gv == R(0)) continue;
          for (int kk = 0; kk < k; ++kk) da.data[(size_t)i * k + kk] += gv * tb.data[(size_t)kk * n + j];
        }
      // dB = A^T * G
      for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
          R av = ta.data[(size_t)i * k + kk];
          if (av == R(0)) continue;
          for (int j = 0; j < n; ++j) db.data[(size_t)kk * n + j] += av * go.data[(size_t)i * n + j];
        }
      g.accum(pa, da);
      g.accum(pb, db);
    });
  }

  // x: [m x n], b: [n] broadcast over rows
  Var add_bias(Var x, Var b) {
    const Tensor<R>&tx = value(x), &tb = value(b);
    check(tx.shape.size() == 2 && tb.numel() == tx.cols(), "add_bias: shape mismatch");
    Tensor<R> out = tx;
    int m = tx.rows(), n = tx.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.data[(size_t)i * n + j] += tb.data[j];
    return push(std::move(out), {x.id, b.id}, [m, n](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      g.accum(g.nodes_[id].parents[0], go);
      Tensor<R> db = Tensor<R>::zeros(g.nodes_[g.nodes_[id].parents[1]].value.shape);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) db.data[j] += go.data[(size_t)i * n + j];
      g.accum(g.nodes_[id].parents[1], db);
    });
  }

  Var concat_cols(const std::vector<Var>& vs) {
    check(!vs.empty(), "concat_cols: empty");
    int m = value(vs[0]).rows(), n = 0;
    std::vector<int> widths, par;
    for (Var v : vs) {
      check(value(v).rows() == m, "concat_cols: row mismatch");
      widths.push_back(value(v).cols());
      n += widths.back();
      par.push_back(v.id);
    }
    Tensor<R> out = Tensor<R>::zeros({m, n});
    int off = 0;
    for (size_t k = 0; k < vs.size(); ++k) {
      const Tensor<R>& t = value(vs[k]);
      for (int i = 0; i < m; ++i)
        std::memcpy(&out.data[(size_t)i * n + off], &t.data[(size_t)i * widths[k]], sizeof(R) * widths[k]);
      off += widths[k];
    }
    return push(std::move(out), std::move(par), [m, n, widths](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      int off = 0;
      for (size_t k = 0; k < widths.size(); ++k) {
        Tensor<R> dk = Tensor<R>::zeros({m, widths[k]});
        for (int i = 0; i < m; ++i)
          std::memcpy(&dk.data[(size_t)i * widths[k]], &go.data[(size_t)i * n + off], sizeof(R) * widths[k]);
        g.accum(g.nodes_[id].parents[k], dk);
        off += widths[k];
      }
    });
  }

  // ---- gather / scatter ----

  // rows of `table` selected by `idx`; gradient scatter-adds, so repeated
  // indices accumulate
  Var lookup(Var table, std::vector<int> idx) {
    const Tensor<R>& tt = value(table);
    check(tt.shape.size() == 2, "lookup: table must be rank 2");
    int n = tt.cols();
    Tensor<R> out = Tensor<R>::zeros({(int)idx.size(), n});
    for (size_t i = 0; i < idx.size(); ++i) {
      check(idx[i] >= 0 && idx[i] < tt.rows(),
            "lookup: index " + std::to_string(idx[i]) + " out of range [0," + std::to_string(tt.rows()) + ")");
      std::memcpy(&out.data[i * n], &tt.data[(size_t)idx[i] * n], sizeof(R) * n);
    }
    auto ip = std::make_shared<std::vector<int>>(std::move(idx));
    return push(std::move(out), {table.id}, [ip, n](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      int pt = g.nodes_[id].parents[0];
      Tensor<R> dt = Tensor<R>::zeros(g.nodes_[pt].value.shape);
      for (size_t i = 0; i < ip->size(); ++i)
        for (int j = 0; j < n; ++j) dt.data[(size_t)(*ip)[i] * n + j] += go.data[i * n + j];
      g.accum(pt, dt);
    });
  }

  Var gather_rows(Var x, std::vector<int> idx) {
    const Tensor<R>& tx = value(x);
    check(tx.shape.size() == 2, "gather_rows: rank 2 expected");
    int n = tx.cols();
    Tensor<R> out = Tensor<R>::zeros({(int)idx.size(), n});
    for (size_t i = 0; i < idx.size(); ++i) {
      check(idx[i] >= 0 && idx[i] < tx.rows(), "gather_rows: index out of range");
      std::memcpy(&out.data[i * n], &tx.data[(size_t)idx[i] * n], sizeof(R) * n);
    }
    auto ip = std::make_shared<std::vector<int>>(std::move(idx));
    return push(std::move(out), {x.id}, [ip, n](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      int px = g.nodes_[id].parents[0];
      Tensor<R> dx = Tensor<R>::zeros(g.nodes_[px].value.shape);
      for (size_t i = 0; i < ip->size(); ++i)
        for (int j = 0; j < n; ++j) dx.data[(size_t)(*ip)[i] * n + j] += go.data[i * n + j];
      g.accum(px, dx);
    });
  }

  // T step tensors of [B x n] -> [B*T x n], row b*T + t (example-major)
  Var stack_steps(const std::vector<Var>& steps) {
    check(!steps.empty(), "stack_steps: empty");
    int b = value(steps[0]).rows(), n = value(steps[0]).cols(), T = (int)steps.size();
    std::vector<int> par;
    for (Var v : steps) {
      check(value(v).rows() == b && value(v).cols() == n, "stack_steps: shape mismatch");
      par.push_back(v.id);
    }
    Tensor<R> out = Tensor<R>::zeros({b * T, n});
    for (int t = 0; t < T; ++t) {
      const Tensor<R>& s = value(steps[t]);
      for (int i = 0; i < b; ++i)
        std::memcpy(&out.data[((size_t)i * T + t) * n], &s.data[(size_t)i * n], sizeof(R) * n);
    }
    return push(std::move(out), std::move(par), [b, n, T](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      for (int t = 0; t < T; ++t) {
        Tensor<R> ds = Tensor<R>::zeros({b, n});
        for (int i = 0; i < b; ++i)
          std::memcpy(&ds.data[(size_t)i * n], &go.data[((size_t)i * T + t) * n], sizeof(R) * n);
        g.accum(g.nodes_[id].parents[t], ds);
      }
    });
  }

  // out[i,:] = m[i] ? a[i,:] : b[i,:]  (per-row mask; mask is constant)
  Var row_lerp(Var a, Var b, const std::vector<uint8_t>& mask) {
    const Tensor<R>&ta = value(a), &tb = value(b);
    check(ta.same_shape(tb) && (int)mask.size() == ta.rows(), "row_lerp: shape mismatch");
    int m = ta.rows(), n = ta.cols();
    Tensor<R> out = Tensor<R>::zeros({m, n});
    for (int i = 0; i < m; ++i)
      std::memcpy(&out.data[(size_t)i * n], mask[i] ? &ta.data[(size_t)i * n] : &tb.data[(size_t)i * n],
                  sizeof(R) * n);
    auto mp = std::make_shared<std::vector<uint8_t>>(mask);
    return push(std::move(out), {a.id, b.id}, [mp, m, n](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      Tensor<R> da = Tensor<R>::zeros({m, n}), db = Tensor<R>::zeros({m, n});
      for (int i = 0; i < m; ++i)
        std::memcpy((*mp)[i] ? &da.data[(size_t)i * n] : &db.data[(size_t)i * n], &go.data[(size_t)i * n],
                    sizeof(R) * n);
      g.accum(g.nodes_[id].parents[0], da);
      g.accum(g.nodes_[id].parents[1], db);
    });
  }

  // ---- probability ops ----

  // rows of x normalized over the last axis; optional column mask shared by
  // all rows. Masked entries are exactly 0. Stabilized by max subtraction.
  Var softmax(Var x, const std::vector<uint8_t>& mask = {}) {
    const Tensor<R>& tx = value(x);
    check(tx.shape.size() == 2, "softmax: rank 2 expected");
    int m = tx.rows(), n = tx.cols();
    if (!mask.empty()) {
      check((int)mask.size() == n, "softmax: mask size mismatch");
      bool any = false;
      for (uint8_t b : mask) any |= (b != 0);
      check(any, "softmax: all positions masked");
    }
    Tensor<R> out = Tensor<R>::zeros({m, n});
    for (int i = 0; i < m; ++i) {
      R mx = -std::numeric_limits<R>::infinity();
      for (int j = 0; j < n; ++j)
        if (mask.empty() || mask[j]) mx = std::max(mx, tx.at(i, j));
      R z = 0;
      for (int j = 0; j < n; ++j)
        if (mask.empty() || mask[j]) {
          out.at(i, j) = std::exp(tx.at(i, j) - mx);
          z += out.at(i, j);
        }
      for (int j = 0; j < n; ++j) out.at(i, j) /= z;
    }
    return push(std::move(out), {x.id}, [m, n](Graph& g, int id) {
      const Tensor<R>&go = g.grads_[id], &y = g.nodes_[id].value;
      Tensor<R> dx = Tensor<R>::zeros({m, n});
      for (int i = 0; i < m; ++i) {
        R dot = 0;
        for (int j = 0; j < n; ++j) dot += go.at(i, j) * y.at(i, j);
        for (int j = 0; j < n; ++j) dx.at(i, j) = y.at(i, j) * (go.at(i, j) - dot);
      }
      g.accum(g.nodes_[id].parents[0], dx);
    });
  }

  // sum over unmasked rows of -ln(max(probs[i, target[i]], floor)).
  // Mean is left to the caller (divide by the unmasked count).
  Var nll_sum(Var probs, const std::vector<int>& targets, const std::vector<uint8_t>& mask) {
    const Tensor<R>& tp = value(probs);
    check(tp.shape.size() == 2, "nll_sum: rank 2 expected");
    int m = tp.rows(), n = tp.cols();
    check((int)targets.size() == m && (int)mask.size() == m, "nll_sum: target/mask size mismatch");
    const R floor = R(1e-12);
    double total = 0;
    for (int i = 0; i < m; ++i) {
      if (!mask[i]) continue;
      check(targets[i] >= 0 && targets[i] < n, "nll_sum: target out of range");
      total += -std::log(std::max(tp.at(i, targets[i]), floor));
    }
    auto tgt = std::make_shared<std::vector<int>>(targets);
    auto msk = std::make_shared<std::vector<uint8_t>>(mask);
    return push(Tensor<R>::scalar((R)total), {probs.id}, [tgt, msk, m, n, floor](Graph& g, int id) {
      R g0 = g.grads_[id].data[0];
      int pp = g.nodes_[id].parents[0];
      const Tensor<R>& tp = g.nodes_[pp].value;
      Tensor<R> dp = Tensor<R>::zeros({m, n});
      for (int i = 0; i < m; ++i) {
        if (!(*msk)[i]) continue;
        R p = tp.at(i, (*tgt)[i]);
        if (p > floor) dp.at(i, (*tgt)[i]) = -g0 / p;  // floored probs get zero grad
      }
      g.accum(pp, dp);
    });
  }

  // Luong dot attention for one decoder step over per-example keys.
  //   q:  [B x e]        kv: [B*N x e] (row b*N + n)     mask: B*N flags
  // context[b] = sum_n softmax_n(q[b].kv[b,n]) kv[b,n]; all-masked rows
  // produce a zero context and zero weights. Weights are stashed for
  // inspection via last value in `weights_out` if given.
  Var attend(Var q, Var kv, const std::vector<uint8_t>& mask, int n_keys,
             std::shared_ptr<Tensor<R>>* weights_out = nullptr) {
    const Tensor<R>&tq = value(q), &tkv = value(kv);
    int b = tq.rows(), e = tq.cols(), N = n_keys;
    check(tkv.rows() == b * N && tkv.cols() == e, "attend: kv shape mismatch");
    check((int)mask.size() == b * N, "attend: mask size mismatch");
    auto alpha = std::make_shared<Tensor<R>>(Tensor<R>::zeros({b, N}));
    Tensor<R> out = Tensor<R>::zeros({b, e});
    for (int i = 0; i < b; ++i) {
      R mx = -std::numeric_limits<R>::infinity();
      std::vector<R> score(N, R(0));
      bool any = false;
      for (int n = 0; n < N; ++n) {
        if (!mask[(size_t)i * N + n]) continue;
        any = true;
        R s = 0;
        const R* krow = &tkv.data[((size_t)i * N + n) * e];
        const R* qrow = &tq.data[(size_t)i * e];
        for (int j = 0; j < e; ++j) s += qrow[j] * krow[j];
        score[n] = s;
        mx = std::max(mx, s);
      }
      if (!any) continue;  // degenerate: zero context, zero weights
      R z = 0;
      for (int n = 0; n < N; ++n)
        if (mask[(size_t)i * N + n]) {
          alpha->at(i, n) = std::exp(score[n] - mx);
          z += alpha->at(i, n);
        }
      for (int n = 0; n < N; ++n) {
        alpha->at(i, n) /= z;
        if (alpha->at(i, n) == R(0)) continue;
        const R* vrow = &tkv.data[((size_t)i * N + n) * e];
        for (int j = 0; j < e; ++j) out.data[(size_t)i * e + j] += alpha->at(i, n) * vrow[j];
      }
    }
    if (weights_out) *weights_out = alpha;
    auto mp = std::make_shared<std::vector<uint8_t>>(mask);
    return push(std::move(out), {q.id, kv.id}, [alpha, mp, b, e, N](Graph& g, int id) {
      const Tensor<R>& go = g.grads_[id];
      int pq = g.nodes_[id].parents[0], pkv = g.nodes_[id].parents[1];
      const Tensor<R>&tq = g.nodes_[pq].value, &tkv = g.nodes_[pkv].value;
      Tensor<R> dq = Tensor<R>::zeros({b, e}), dkv = Tensor<R>::zeros({b * N, e});
      for (int i = 0; i < b; ++i) {
        // d alpha then d score through the softmax, then to q / kv
        std::vector<R> dalpha(N, R(0)), dscore(N, R(0));
        R dot = 0;
        for (int n = 0; n < N; ++n) {
          if (!(*mp)[(size_t)i * N + n]) continue;
          R s = 0;
          for (int j = 0; j < e; ++j) s += go.data[(size_t)i * e + j] * tkv.data[((size_t)i * N + n) * e + j];
          dalpha[n] = s;
          dot += s * alpha->at(i, n);
        }
        for (int n = 0; n < N; ++n) {
          if (!(*mp)[(size_t)i * N + n]) continue;
          dscore[n] = alpha->at(i, n) * (dalpha[n] - dot);
          const R* krow = &tkv.data[((size_t)i * N + n) * e];
          R* dkrow = &dkv.data[((size_t)i * N + n) * e];
          for (int j = 0; j < e; ++j) {
            dq.data[(size_t)i * e + j] += dscore[n] * krow[j];
            dkrow[j] += dscore[n] * tq.data[(size_t)i * e + j] + alpha->at(i, n) * go.data[(size_t)i * e + j];
          }
        }
      }
      g.accum(pq, dq);
      g.accum(pkv, dkv);
    });
  }

  void backward(Var loss) {
    check(value(loss).numel() == 1, "backward: loss must be scalar");
    check(value(loss).finite(), "backward: non-finite loss");
    grads_.assign(nodes_.size(), Tensor<R>());
    grads_[loss.id] = Tensor<R>::scalar(R(1));
    for (int i = loss.id; i >= 0; --i) {
      if (grads_[i].empty() || !nodes_[i].back) continue;
      nodes_[i].back(*this, i);
    }
  }

 private:
  Var push(Tensor<R> value, std::vector<int> parents, std::function<void(Graph&, int)> back) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(back)});
    return Var{(int)nodes_.size() - 1};
  }

  void accum(int id, const Tensor<R>& g) {
    if (grads_[id].empty()) {
      grads_[id] = g;
      return;
    }
    for (long i = 0; i < g.numel(); ++i) grads_[id].data[i] += g.data[i];
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<R>> grads_;
};

// ---- substrate layer compositions ----

// one GRU cell's parameters as graph leaves
template <typename R>
struct GruVars {
  Var wz, uz, bz, wr, ur, br, wh, uh, bh;
};

// z = sig(x Wz + h Uz + bz); r = sig(x Wr + h Ur + br);
// hc = tanh(x Wh + (r*h) Uh + bh); h' = z*h + (1-z)*hc
template <typename R>
Var gru_step(Graph<R>& g, const GruVars<R>& p, Var x, Var h) {
  Var z = g.sigmoid(g.add(g.add_bias(g.matmul(x, p.wz), p.bz), g.matmul(h, p.uz)));
  Var r = g.sigmoid(g.add(g.add_bias(g.matmul(x, p.wr), p.br), g.matmul(h, p.ur)));
  Var hc = g.tanh_(g.add(g.add_bias(g.matmul(x, p.wh), p.bh), g.matmul(g.mul(r, h), p.uh)));
  return g.add(g.mul(z, h), g.mul(g.one_minus(z), hc));
}

// Single-sequence GRU over T inputs of [rows x e_in]; a false mask step
// carries the previous state through unchanged. Returns all T states plus
// the final state (h0 when the mask is all false).
template <typename R>
struct GruSequenceOut {
  std::vector<Var> states;
  Var final;
};

template <typename R>
GruSequenceOut<R> gru_sequence(Graph<R>& g, const GruVars<R>& p, const std::vector<Var>& xs, Var h0,
                               const std::vector<uint8_t>& mask) {
  check(xs.size() == mask.size(), "gru_sequence: mask length mismatch");
  GruSequenceOut<R> out;
  Var h = h0;
  for (size_t t = 0; t < xs.size(); ++t) {
    if (mask[t]) h = gru_step(g, p, xs[t], h);
    out.states.push_back(h);
  }
  out.final = h;
  return out;
}

enum class Activation { none, tanh };

template <typename R>
Var dense(Graph<R>& g, Var x, Var w, Var b, Activation act) {
  Var y = g.add_bias(g.matmul(x, w), b);
  return act == Activation::tanh ? g.tanh_(y) : y;
}

// mean over unmasked positions of -ln(probs[t, target[t]]), floored at 1e-12
template <typename R>
Var cross_entropy(Graph<R>& g, Var probs, const std::vector<int>& targets, const std::vector<uint8_t>& mask) {
  long count = 0;
  for (uint8_t m : mask) count += (m != 0);
  check(count > 0, "cross_entropy: no unmasked positions");
  return g.scale(g.nll_sum(probs, targets, mask), R(1) / (R)count);
}

}  // namespace ctxsum

#endif
