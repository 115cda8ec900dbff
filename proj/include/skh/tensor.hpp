// Dense row-major tensor of 64-bit floats. The project works in 2-D
// throughout (scalars are 1x1, row vectors 1xd), which keeps every op and
// its gradient easy to audit.

#ifndef SKH_TENSOR_HPP
#define SKH_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "skh/common.hpp"

namespace skh {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty, or same length as data

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
      throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                           std::to_string(data.size()) + " values");
  }

  static Tensor zeros(std::size_t r, std::size_t c) {
    return Tensor({r, c}, std::vector<double>(r * c, 0.0));
  }
  static Tensor full(std::size_t r, std::size_t c, double v) {
    return Tensor({r, c}, std::vector<double>(r * c, v));
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor row(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
  }
  static Tensor col(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n, 1}, std::move(v));
  }
  // Uniform init in [-a, a].
  static Tensor uniform(std::size_t r, std::size_t c, double a, RngStream& rng) {
    Tensor t = zeros(r, c);
    for (double& x : t.data) x = (rng.uniform() * 2.0 - 1.0) * a;
    return t;
  }
  static Tensor normal(std::size_t r, std::size_t c, double stddev, RngStream& rng) {
    Tensor t = zeros(r, c);
    for (double& x : t.data) x = rng.normal() * stddev;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_matrix() const { return shape.size() == 2; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  double item() const {
    if (numel() != 1)
      throw DimensionError("item() on tensor of shape " + shape_str(shape));
    return data[0];
  }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), 0.0);
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape;
}

}  // namespace skh

#endif  // SKH_TENSOR_HPP
