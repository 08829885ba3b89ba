#ifndef CTXSUM_TENSOR_HPP
#define CTXSUM_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxsum {

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

// Dense row-major tensor of 32- or 64-bit reals. Shape is a list of
// positive dims; data length always equals the shape product.
template <typename R>
struct Tensor {
  std::vector<int> shape;
  std::vector<R> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<R> d) : shape(std::move(s)), data(std::move(d)) {
    check(numel_of(shape) == (long)data.size(), "tensor: shape/data size mismatch");
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      check(d > 0, "tensor: nonpositive dim");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    t.shape = std::move(s);
    t.data.assign(numel_of(t.shape), R(0));
    return t;
  }

  static Tensor scalar(R v) { return Tensor({1}, {v}); }

  long numel() const { return (long)data.size(); }
  bool empty() const { return data.empty(); }

  int rows() const {
    check(shape.size() == 2, "tensor: rows() needs rank 2");
    return shape[0];
  }
  int cols() const {
    check(shape.size() == 2, "tensor: cols() needs rank 2");
    return shape[1];
  }

  R& at(int i, int j) { return data[(size_t)i * shape[1] + j]; }
  R at(int i, int j) const { return data[(size_t)i * shape[1] + j]; }

  bool finite() const {
    for (R v : data)
      if (!std::isfinite((double)v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

template <typename R>
Tensor<R> from_rows(const std::vector<std::vector<R>>& rows) {
  check(!rows.empty(), "from_rows: empty");
  Tensor<R> t = Tensor<R>::zeros({(int)rows.size(), (int)rows[0].size()});
  for (int i = 0; i < (int)rows.size(); ++i) {
    check(rows[i].size() == rows[0].size(), "from_rows: ragged");
    for (int j = 0; j < (int)rows[0].size(); ++j) t.at(i, j) = rows[i][j];
  }
  return t;
}

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace ctxsum

#endif
