#ifndef CTXSUM_OPTIM_HPP
#define CTXSUM_OPTIM_HPP

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "rng.hpp"
#include "tensor.hpp"

namespace ctxsum {

// Named parameter tensors plus their Adam moment accumulators and the
// global step counter. One trainer owns and mutates a store; everything
// else reads snapshots.
template <typename R>
struct ParamStore {
  std::map<std::string, Tensor<R>> params;
  std::map<std::string, Tensor<R>> adam_m, adam_v;
  long step = 0;

  Tensor<R>& add(const std::string& name, Tensor<R> t) {
    check(!params.count(name), "param store: duplicate name " + name);
    auto it = params.emplace(name, std::move(t)).first;
    adam_m.emplace(name, Tensor<R>::zeros(it->second.shape));
    adam_v.emplace(name, Tensor<R>::zeros(it->second.shape));
    return it->second;
  }

  Tensor<R>& at(const std::string& name) {
    auto it = params.find(name);
    check(it != params.end(), "param store: unknown name " + name);
    return it->second;
  }
  const Tensor<R>& at(const std::string& name) const {
    auto it = params.find(name);
    check(it != params.end(), "param store: unknown name " + name);
    return it->second;
  }

  long total_size() const {
    long n = 0;
    for (auto& [k, v] : params) n += v.numel();
    return n;
  }

  template <typename R2>
  ParamStore<R2> cast() const {
    ParamStore<R2> out;
    for (auto& [k, v] : params) {
      Tensor<R2> t = Tensor<R2>::zeros(v.shape);
      for (long i = 0; i < v.numel(); ++i) t.data[i] = (R2)v.data[i];
      out.add(k, std::move(t));
    }
    out.step = step;
    return out;
  }
};

// glorot-uniform for weight matrices, zeros for biases, small uniform for
// embedding tables; every draw goes through the passed-in rng
template <typename R>
Tensor<R> init_matrix(Rng& rng, int fan_in, int fan_out) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor<R> t = Tensor<R>::zeros({fan_in, fan_out});
  for (R& v : t.data) v = (R)rng.uniform(-limit, limit);
  return t;
}

template <typename R>
Tensor<R> init_embedding(Rng& rng, int rows, int cols) {
  Tensor<R> t = Tensor<R>::zeros({rows, cols});
  for (R& v : t.data) v = (R)rng.uniform(-0.05, 0.05);
  return t;
}

template <typename R>
Tensor<R> init_bias(int n) {
  return Tensor<R>::zeros({n});
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using GradMap = std::map<std::string, Tensorf>;

// standard bias-corrected Adam; grads must be keyed exactly like params
template <typename R>
void adam_update(ParamStore<R>& store, const std::map<std::string, Tensor<R>>& grads, const AdamConfig& cfg) {
  check(grads.size() == store.params.size(), "adam: grad key set differs from params");
  for (auto& [name, g] : grads) check(store.params.count(name), "adam: unexpected grad key " + name);
  store.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, (double)store.step);
  double bc2 = 1.0 - std::pow(cfg.beta2, (double)store.step);
  for (auto& [name, p] : store.params) {
    const Tensor<R>& g = grads.at(name);
    check(g.same_shape(p), "adam: grad shape mismatch for " + name);
    Tensor<R>& m = store.adam_m.at(name);
    Tensor<R>& v = store.adam_v.at(name);
    for (long i = 0; i < p.numel(); ++i) {
      m.data[i] = (R)(cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i]);
      v.data[i] = (R)(cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * (double)g.data[i] * g.data[i]);
      double mh = m.data[i] / bc1;
      double vh = v.data[i] / bc2;
      p.data[i] = (R)(p.data[i] - cfg.lr * mh / (std::sqrt(vh) + cfg.eps));
    }
  }
}

// scales all grads in place so the global L2 norm is at most max_norm
template <typename R>
double clip_global_norm(std::map<std::string, Tensor<R>>& grads, double max_norm) {
  double sq = 0;
  for (auto& [k, g] : grads)
    for (R v : g.data) sq += (double)v * v;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    R s = (R)(max_norm / norm);
    for (auto& [k, g] : grads)
      for (R& v : g.data) v *= s;
  }
  return norm;
}

// Forward closure for gradient checking: computes the loss at the given
// parameters, and when grads_out is non-null also fills analytic gradients.
template <typename R>
using LossClosure = std::function<double(ParamStore<R>&, std::map<std::string, Tensor<R>>*)>;

struct FdOptions {
  double h = 1e-3;               // central-difference step, in [1e-4, 1e-2]
  long max_coords_per_tensor = 0;  // 0 = all coordinates
  uint64_t seed = 17;
};

// Max over sampled parameter coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// with central differences. Run with R=double for numerical headroom; the
// production float path shares the same templated code.
template <typename R>
double finite_difference_check(const LossClosure<R>& loss, ParamStore<R>& store, const FdOptions& opt = {}) {
  check(opt.h >= 1e-4 && opt.h <= 1e-2, "fd check: h outside [1e-4, 1e-2]");
  std::map<std::string, Tensor<R>> analytic;
  double base = loss(store, &analytic);
  check(std::isfinite(base), "fd check: non-finite loss");
  Rng rng(opt.seed);
  double worst = 0;
  for (auto& [name, p] : store.params) {
    const Tensor<R>& a = analytic.at(name);
    long n = p.numel();
    std::vector<long> coords(n);
    for (long i = 0; i < n; ++i) coords[i] = i;
    if (opt.max_coords_per_tensor > 0 && n > opt.max_coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(opt.max_coords_per_tensor);
    }
    for (long i : coords) {
      R keep = p.data[i];
      p.data[i] = keep + (R)opt.h;
      double lp = loss(store, nullptr);
      p.data[i] = keep - (R)opt.h;
      double lm = loss(store, nullptr);
      p.data[i] = keep;
      check(std::isfinite(lp) && std::isfinite(lm), "fd check: non-finite loss at " + name);
      double numeric = (lp - lm) / (2.0 * opt.h);
      double an = (double)a.data[i];
      double rel = std::fabs(an - numeric) / std::max(1e-8, std::fabs(an) + std::fabs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace ctxsum

#endif
